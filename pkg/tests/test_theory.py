import numpy as np
import pytest

from fdrlab import theory as th
from fdrlab.design import DesignSpec, make_gram
from fdrlab.tamper import knockoff_s
from fdrlab.theory import MethodSpec


def S(method, design="block2", param=0.0, **kw):
    return MethodSpec(method, design, param, **kw)


# ---------------------------------------------------------------- hand values

def test_rho0_value():
    assert th.RHO0 == pytest.approx(np.sqrt(2) - 1 - np.sqrt(2 - np.sqrt(2)), abs=1e-15)
    assert th.RHO0 == pytest.approx(-0.3511533, abs=1e-7)


def test_f_plus_example():
    # rho = 0: theta + (sqrt r - sqrt u)^2 = 0.3 + (sqrt 2 - 1)^2
    assert th.f_plus_hamm(1.0, 2.0, 0.3, 0.0) == pytest.approx(0.3 + (np.sqrt(2) - 1) ** 2)
    assert th.f_plus_hamm(1.0, 2.0, 0.3, 0.0) == pytest.approx(0.47157, abs=1e-5)


def test_path_fp_two_routes():
    # FP rate at rho=0.5, r=1, u=2 written two ways:
    # (1-rho)/(1+rho) u + (sqrt u - sqrt r)_+^2 - (1-rho)/(1+rho)(sqrt u - (1+rho) sqrt r)_+^2
    rho, r, u, theta = 0.5, 1.0, 2.0, 0.3
    k = (1 - rho) / (1 + rho)
    b = k * u + max(np.sqrt(u) - np.sqrt(r), 0) ** 2 - k * max(np.sqrt(u) - (1 + rho) * np.sqrt(r), 0) ** 2
    assert b == pytest.approx(0.838239, abs=1e-6)
    e = th.fp_fn_exponents(S("lassopath_prototype", param=rho), theta, r, u)
    assert e.exp_fp == pytest.approx(1 - theta - b, abs=1e-12)
    o = th.oracle_exponents(S("lassopath_prototype", param=rho), theta, r, u)
    assert o.exp_fp == pytest.approx(1 - theta - b, abs=1e-9)


def test_orthogonal_knockoff_values():
    # FN rate min((1-a) r/2, (sqrt r - sqrt u)^2): theta=0.5, r=4, u=1
    e = th.fp_fn_exponents(S("knockoff_sgm", "orthogonal", 0.6), 0.5, 4.0, 1.0)
    assert e.exp_fp == pytest.approx(0.0)
    assert e.exp_fn == pytest.approx(1 - 0.5 - 0.8)
    e = th.fp_fn_exponents(S("knockoff_sgm", "orthogonal", 0.0), 0.5, 4.0, 1.0)
    assert e.exp_fn == pytest.approx(-0.5)
    e = th.fp_fn_exponents(S("gm_dif", "orthogonal"), 0.5, 4.0, 1.0)
    assert e.exp_fn == pytest.approx(0.0)
    e = th.fp_fn_exponents(S("knockoff_dif", "orthogonal", 0.5), 0.5, 4.0, 1.0)
    assert e.exp_fn == pytest.approx(0.5 - 0.25)


def test_bh_tradeoff():
    g_tpr, g_fdr = th.tradeoff_curve(S("bh_marginal", "orthogonal"), 0.3, 2.0, [0.5, 0.9])
    # g_fdr = (u - theta)_+
    assert g_fdr == pytest.approx([0.2, 0.6])
    assert g_tpr == pytest.approx([(np.sqrt(2) - np.sqrt(0.5)) ** 2, (np.sqrt(2) - np.sqrt(0.9)) ** 2])


def test_ols_phase_example():
    pc = th.phase_curves(S("ols_prototype", param=0.5), [0.5])
    assert pc.h_er[0] == pytest.approx((1 + np.sqrt(0.5)) ** 2 / 0.75)
    assert pc.h_er[0] == pytest.approx(3.88562, abs=1e-5)
    assert pc.h_ar[0] == pytest.approx(0.5 / 0.75)


def test_knockoff_ols_ci_phase():
    # CI knockoffs on a 2x2 block: omega1 = (1 + rho^2)... isolated branch v1 (1 + sqrt(1-theta))^2
    rho = 0.5
    G = np.array([[1, rho], [rho, 1]])
    s = np.full(2, 1 - rho ** 2)
    T = np.block([[G, G - np.diag(s)], [G - np.diag(s), G]])
    Ti = np.linalg.inv(T)
    v1, v2 = Ti[0, 0], Ti[0, 2]
    assert v1 == pytest.approx(16 / 9) and v2 == pytest.approx(4 / 9)
    theta = np.array([0.2, 0.8])
    pc = th.phase_curves(S("knockoff_ols", param=rho, flavor="ci"), theta)
    expect = np.maximum(v1 * (1 + np.sqrt(1 - theta)) ** 2, 2 * (v1 + v2) * (1 - theta))
    assert np.allclose(pc.h_er, expect)


def test_singular_tampered_designs_raise():
    with pytest.raises(th.TheoryError):
        th.fp_fn_exponents(S("knockoff_ols", param=0.5, flavor="ec"), 0.3, 2.0, 1.0)
    with pytest.raises(th.TheoryError):
        th.phase_curves(S("knockoff_ols", param=0.5, flavor="ec"))
    # the mirror regression has only p+1 columns and stays well posed
    assert np.all(np.isfinite(th.phase_curves(S("degm", param=0.5, flavor="ec")).h_er))


def test_unavailable_pairs_are_nan():
    e = th.fp_fn_exponents(S("knockoff_ci", param=0.5), 0.3, 2.0, 1.0)
    assert not e.available and np.isfinite(e.exp_hamm)
    with pytest.raises(th.TheoryError):
        th.tradeoff_curve(S("knockoff_ci", param=0.5), 0.3, 2.0, [1.0])
    e = th.fp_fn_exponents(S("knockoff_ec", param=0.3), 0.3, 2.0, 1.0)
    assert not e.available


@pytest.mark.parametrize("kw", [dict(method="nope"), dict(method="knockoff_ec", design="orthogonal"),
                                dict(method="bh_marginal", design="block2")])
def test_method_spec_validation(kw):
    with pytest.raises(th.TheoryError):
        MethodSpec(**kw)


def test_input_validation():
    spec = S("lassopath_prototype", param=0.2)
    for args in [(0.0, 1.0, 1.0), (0.5, -1.0, 1.0), (0.5, 1.0, -0.1)]:
        with pytest.raises(th.TheoryError):
            th.fp_fn_exponents(spec, *args)


# ---------------------------------------------------------------- identities

def test_ec_hamming_equals_path_hamming_above_half():
    u = np.linspace(0, 8, 401)
    for rho in (0.5, 0.6, 0.75, 0.9):
        for theta in (0.1, 0.4, 0.7):
            for r in (0.5, 2.0, 5.0):
                ec = th.hamming_exponent(S("knockoff_ec", param=rho), theta, r, u)
                lp = th.hamming_exponent(S("lassopath_prototype", param=rho), theta, r, u)
                assert np.allclose(ec, lp, atol=1e-12)


def test_gm_block_phase_equals_ols():
    for rho in (-0.6, 0.2, 0.7):
        a = th.phase_curves(S("gm_sgm", param=rho))
        b = th.phase_curves(S("ols_prototype", param=rho))
        assert np.allclose(a.h_er, b.h_er) and np.allclose(a.h_ar, b.h_ar)


def test_gm_orthogonal_equals_knockoff_at_zero_correlation():
    u = np.linspace(0, 5, 101)
    for theta, r in [(0.2, 1.0), (0.6, 3.0)]:
        g = th.fp_fn_exponents(S("gm_sgm", "orthogonal"), theta, r, u)
        k = th.fp_fn_exponents(S("knockoff_sgm", "orthogonal", 0.0), theta, r, u)
        assert np.allclose(g.exp_fp, k.exp_fp) and np.allclose(g.exp_fn, k.exp_fn)


def test_signed_is_max_over_sign():
    u = np.linspace(0, 6, 61)
    for m in ("lassopath_prototype", "ols_prototype"):
        s = th.hamming_exponent(S(m, param=0.6, signed=True), 0.3, 2.5, u)
        a = th.hamming_exponent(S(m, param=0.6), 0.3, 2.5, u)
        b = th.hamming_exponent(S(m, param=-0.6), 0.3, 2.5, u)
        assert np.allclose(s, np.maximum(a, b))


def test_optimal_u_closed_form_bh():
    # 1 - u = 1 - theta - (sqrt r - sqrt u)^2 gives u* = (r + theta)^2 / (4r)
    spec = S("bh_marginal", "orthogonal")
    for theta, r in [(0.5, 2.0), (0.3, 4.0), (0.2, 1.0)]:
        assert th.optimal_u(spec, theta, r) == pytest.approx((r + theta) ** 2 / (4 * r), abs=1e-7)


def test_optimal_u_fplus_matches_search():
    for rho in (0.0, 0.3, 0.6):
        for theta in (0.2, 0.5):
            for r in (0.1, 1.0, 3.0, 6.0):
                grid = np.linspace(0, 12, 240001)
                best = th.f_plus_hamm(grid, r, theta, rho).max()
                # a kink can sit between grid points: slope x step/2 < 1e-4
                for us in (th.optimal_u_fplus(theta, r, rho),
                           th.optimal_u(S("lassopath_prototype", param=rho), theta, r)):
                    val = th.f_plus_hamm(us, r, theta, rho)
                    assert best - 1e-8 <= val <= best + 1e-4


def test_optimal_u_leftmost_on_flat_stretch():
    # r < theta: the exponent is flat at 1 - theta for u >= r-ish; leftmost point returned
    spec = S("bh_marginal", "orthogonal")
    u = th.optimal_u(spec, 0.8, 0.1)
    v = th.hamming_exponent(spec, 0.8, 0.1, u)
    assert th.hamming_exponent(spec, 0.8, 0.1, u - 1e-4) > v


# ---------------------------------------------------------------- phase curves

@pytest.mark.parametrize("spec", [
    S("bh_marginal", "orthogonal"), S("knockoff_sgm", "orthogonal", 0.4),
    S("knockoff_dif", "orthogonal", 0.2), S("gm_dif", "orthogonal"),
    S("ols_prototype", param=0.5), S("lassopath_prototype", param=0.6),
    S("lassopath_prototype", param=-0.5), S("knockoff_ec", param=0.7),
    S("knockoff_ec", param=-0.45), S("knockoff_ols", param=0.5, flavor="ci"),
])
def test_phase_closed_form_matches_bisection(spec):
    theta = np.array([0.15, 0.45, 0.8])
    cf = th.phase_curves(spec, theta)
    nm = th.phase_curves_numeric(spec, theta)
    assert np.allclose(cf.h_er, nm.h_er, rtol=1e-5)
    # h_AR is a quadratic contact, so bisection resolves it to ~1e-4 only
    assert np.allclose(cf.h_ar, nm.h_ar, rtol=2e-4, atol=1e-4)


def test_ec_strong_negative_has_no_exact_recovery():
    pc = th.phase_curves(S("knockoff_ec", param=-0.6), [0.3, 0.7])
    assert pc.h_er[0] == np.inf and np.isfinite(pc.h_er[1])
    assert pc.branch[0] == "inf"


def test_lasso_phase_positive_rho_uses_abs_form():
    # at rho > 0 the second candidate is (1 + sqrt((1+rho)/(1-rho)))^2 (1 - theta)
    rho, theta = 0.8, 0.1
    h2 = (1 + np.sqrt((1 + rho) / (1 - rho))) ** 2 * (1 - theta)
    pc = th.phase_curves(S("lassopath_prototype", param=rho), [theta])
    assert pc.h_er[0] == pytest.approx(max(h2, (1 + np.sqrt(1 - theta)) ** 2))


# ---------------------------------------------------------------- variance profile

@pytest.mark.parametrize("kind,extra", [("block2", {"rho": 0.5}), ("expdecay", {"rho": 0.5}),
                                        ("wishart", {})])
def test_variance_profile_against_direct_inverses(kind, extra):
    G = make_gram(DesignSpec(kind, 8, 24, seed=1, **extra))
    # stay strictly inside diag(s) < 2G so the knockoff Gram is invertible
    s = 0.9 * knockoff_s(G, "ci").s
    prof = th.variance_profile(G, s)
    assert np.allclose(prof.omega, np.diag(np.linalg.inv(G)))
    off = G - np.diag(s)
    Ti = np.linalg.inv(np.block([[G, off], [off, G]]))
    assert np.allclose(prof.omega1, np.diag(Ti)[:8])
    assert np.allclose(prof.omega2, np.diag(Ti[:8, 8:]))
    for j in range(8):
        # Gram of X with x~_j appended
        cols = np.r_[np.arange(8), 8 + j]
        M = np.block([[G, off[:, [j]]], [off[[j], :], G[[j]][:, [j]]]])
        Mi = np.linalg.inv(M)
        assert prof.sigma1[j] == pytest.approx(Mi[j, j])
        assert prof.sigma2[j] == pytest.approx(Mi[j, 8], abs=1e-10)
        del cols


def test_variance_profile_block2_ci_values():
    prof = th.variance_profile(np.array([[1, 0.5], [0.5, 1]]), np.full(2, 0.75))
    assert np.allclose(prof.omega1, 16 / 9) and np.allclose(prof.omega2, 4 / 9)
    assert np.allclose(prof.sigma1, 4 / 3) and np.allclose(prof.sigma2, 0.0)


# ---------------------------------------------------------------- oracle

ORACLE_CASES = [
    S("bh_marginal", "orthogonal"), S("knockoff_sgm", "orthogonal", 0.3),
    S("knockoff_dif", "orthogonal", -0.4), S("gm_sgm", "orthogonal"), S("gm_dif", "orthogonal"),
    S("ols_prototype", param=0.4), S("lassopath_prototype", param=0.6),
    S("lassopath_prototype", param=-0.3), S("gm_sgm", param=-0.5),
    S("knockoff_ec", param=0.6), S("knockoff_ec", param=-0.7),
    S("lassopath_prototype", param=0.5, signed=True), S("knockoff_ec", param=0.5, signed=True),
]


@pytest.mark.parametrize("spec", ORACLE_CASES, ids=lambda s: f"{s.method}-{s.param}-{s.signed}")
def test_closed_forms_match_geometric_oracle(spec):
    theta = np.array([0.1, 0.5, 0.9])
    for r in (0.25, 1.5, 4.0):
        for u in (0.1, 1.0, 3.0):
            d = th.oracle_distances(spec, r, u)
            o = th.oracle_exponents(spec, theta, r, u, d)
            for t, ofp, ofn, oh in zip(theta, o.exp_fp, o.exp_fn, o.exp_hamm):
                c = th.fp_fn_exponents(spec, t, r, u)
                assert c.exp_fp == pytest.approx(ofp, abs=1e-9)
                assert c.exp_fn == pytest.approx(ofn, abs=1e-9)
                assert c.exp_hamm == pytest.approx(oh, abs=1e-9)
