import numpy as np
import pytest

from fdrlab import mirror_stats as ms
from fdrlab.design import DesignSpec, design_from_spec
from fdrlab.tamper import knockoffs_for


def test_signed_max_and_difference():
    assert ms.signed_max(3.0, 1.0) == 3.0
    assert ms.signed_max(1.0, 3.0) == -3.0
    # ties count against the variable
    assert ms.signed_max(2.0, 2.0) == -2.0
    assert ms.signed_max(0.0, 0.0) == 0.0
    assert ms.difference(3.0, 1.0) == 2.0
    with pytest.raises(ValueError):
        ms.signed_max(-1.0, 0.0)
    with pytest.raises(ValueError):
        ms.combine(1.0, 1.0, "bogus")


def test_mirror_stat_values():
    assert ms.mirror_stat(2.0, 1.0, "sgm") == 3.0
    assert ms.mirror_stat(2.0, -1.0, "sgm") == -3.0
    assert ms.mirror_stat(2.0, 1.0, "dif") == 2.0
    assert ms.mirror_stat(2.0, -1.0, "dif") == -2.0
    assert ms.mirror_stat(0.0, 1.0, "sgm") == 0.0


def test_fdr_threshold_hand_example():
    w = np.array([5, 4, 3, -2, 1, -1.5, 0])
    # t=1: 2 negatives below -1 vs 3 positives; t=1.5: 1 vs 3
    assert ms.fdr_threshold(w, 0.5) == 1.5
    assert list(ms.select_at_fdr(w, 0.5).selected) == [0, 1, 2]
    assert ms.fdr_threshold(w, 0.2) == 2.0
    assert ms.fdr_threshold(np.zeros(5), 0.1) == np.inf
    assert ms.select_at_fdr(np.array([-1.0, -2.0, 0.5]), 0.1).selected.size == 0
    with pytest.raises(ValueError):
        ms.select_at_fdr(w, 1.5)


def test_select_at_u_and_evaluate():
    w = np.zeros(100)
    w[:3] = [3.0, 3.1, 5.0]
    sel = ms.select_at_u(w, 1.0)
    assert sel.threshold == pytest.approx(np.sqrt(2 * np.log(100)))
    assert list(sel.selected) == [1, 2]
    beta = np.zeros(100)
    beta[[0, 2, 7]] = 1.0
    err = ms.evaluate(sel, beta)
    assert (err.fp, err.fn, err.tp) == (1, 2, 1)
    assert err.hamming == 3
    assert err.fdp == 0.5
    assert err.tpr == pytest.approx(1 / 3)


def test_knockoff_least_squares_scores_match_lstsq(rng):
    D = design_from_spec(DesignSpec("expdecay", 15, 45, rho=0.5, seed=1))
    kb = knockoffs_for(D, "ci", seed=2)
    y = rng.standard_normal(45)
    sv = ms.knockoff_scores(kb, y, ranker="least_squares", kind="dif")
    coef = np.linalg.lstsq(np.column_stack([D.X, kb.Xtilde]), y, rcond=None)[0]
    assert np.allclose(sv.scores, np.abs(coef[:15]) - np.abs(coef[15:]))


def test_path_plan_matches_generic_homotopy(rng):
    from fdrlab.rank import lasso_entry_times
    D = design_from_spec(DesignSpec("block2", 20, 60, rho=0.6, seed=1))
    kb = knockoffs_for(D, "ec", seed=2)
    T = kb.tampered_gram()
    plan = ms.PathPlan(T, 20)
    assert len(plan.quads) == 10 and not plan.blocks
    # X'y always lies in the range of the singular Gram
    h = T @ rng.standard_normal(40) * 2
    e = lasso_entry_times(T, h, collinear="skip").lambda_entry
    assert np.allclose(plan.entry_times(h), e, atol=1e-9)


def test_gm_fast_equals_direct(rng):
    D = design_from_spec(DesignSpec("expdecay", 25, 60, rho=0.7, seed=5))
    y = rng.standard_normal(60)
    for kind in ("sgm", "dif"):
        fast = ms.gm_scores(D, y, kind, seed=8)
        slow = ms.gm_scores(D, y, kind, seed=8, direct=True)
        assert np.allclose(fast.scores, slow.scores, atol=1e-9)


def test_degm_fast_equals_direct(rng):
    D = design_from_spec(DesignSpec("block2", 20, 60, rho=0.5, seed=5))
    kb = knockoffs_for(D, "ci", seed=3)
    y = rng.standard_normal(60)
    fast = ms.degm_scores(D, kb.Xtilde, y)
    slow = ms.degm_scores(D, kb.Xtilde, y, direct=True)
    assert np.allclose(fast.scores, slow.scores, atol=1e-9)


def test_gm_residual_norms_match_direct():
    D = design_from_spec(DesignSpec("wishart", 10, 30, seed=1))
    basis = ms.MirrorBasis(D.X)
    F = ms.gm_directions(D.X, 4, basis)
    for j in range(10):
        Q, _ = np.linalg.qr(np.delete(D.X, j, axis=1))
        for v in (D.X[:, j], F[:, j]):
            r = v - Q @ (Q.T @ v)
            assert np.linalg.norm(r) == pytest.approx(1 / np.sqrt(basis.omega[j]))


def test_null_signs_balanced(rng):
    # flipping a null coordinate with its knockoff leaves the joint law unchanged
    D = design_from_spec(DesignSpec("block2", 10, 40, rho=0.3, seed=1))
    kb = knockoffs_for(D, "ec", seed=2)
    pos = neg = 0
    for _ in range(1500):
        w = ms.knockoff_scores(kb, rng.standard_normal(40)).scores
        pos += np.sum(w > 0)
        neg += np.sum(w < 0)
    # iid fair signs: |pos - neg| within 4 sd
    assert abs(pos - neg) < 4 * np.sqrt(pos + neg)
