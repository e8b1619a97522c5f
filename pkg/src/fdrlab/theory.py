"""
Closed-form error exponents, trade-off curves and phase curves under the
Rare/Weak model, plus a geometric oracle that recomputes the exponents.

Conventions
-----------
All rates are exponents of ``p`` with multi-log factors dropped: an
expected count of false positives ``FP_p(u) = L_p p^{exp_fp}``, likewise
``FN_p`` and the Hamming error ``FP_p + FN_p``.  Variables are selected when
their importance metric exceeds ``sqrt(2 u log p)``.

Designs are either ``orthogonal`` (parameter ``a``: correlation between a
variable and its knockoff) or ``block2`` (parameter ``rho``: correlation
inside each 2x2 block).
"""
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import linalg, optimize

from . import regions

RHO0 = np.sqrt(2) - 1 - np.sqrt(2 - np.sqrt(2))

METHODS = ("bh_marginal", "knockoff_sgm", "knockoff_dif", "gm_sgm", "gm_dif",
           "ols_prototype", "lassopath_prototype", "knockoff_ols", "degm",
           "knockoff_ec", "knockoff_ci")
DESIGNS = ("orthogonal", "block2")

# which (method, design) pairs have a theory
_SUPPORT = {
    "bh_marginal": ("orthogonal",),
    "knockoff_sgm": ("orthogonal",),
    "knockoff_dif": ("orthogonal",),
    "gm_sgm": ("orthogonal", "block2"),
    "gm_dif": ("orthogonal",),
    "ols_prototype": ("orthogonal", "block2"),
    "lassopath_prototype": ("orthogonal", "block2"),
    "knockoff_ols": ("orthogonal", "block2"),
    "degm": ("orthogonal", "block2"),
    "knockoff_ec": ("block2",),
    "knockoff_ci": ("block2",),
}


class TheoryError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    """
    Parameters
    ----------
    method : str
        One of :data:`METHODS`.
    design : str
        ``orthogonal`` or ``block2``.
    param : float
        ``a`` for orthogonal knockoffs, ``rho`` for block designs.
    signed : bool
        Signals take both signs with equal probability.
    flavor : str
        Knockoff construction behind ``knockoff_ols`` and ``degm``
        (``ci`` or ``ec``).
    """
    method: str
    design: str = "block2"
    param: float = 0.0
    signed: bool = False
    flavor: str = "ci"

    def __post_init__(self):
        if self.method not in METHODS:
            raise TheoryError(f"unknown method {self.method!r}")
        if self.design not in DESIGNS:
            raise TheoryError(f"unknown design {self.design!r}")
        if self.design not in _SUPPORT[self.method]:
            raise TheoryError(f"no theory for {self.method} on a {self.design} design")
        if not -1 < self.param < 1:
            raise TheoryError(f"design parameter {self.param} outside (-1, 1)")
        if self.flavor not in ("ci", "ec"):
            raise TheoryError(f"unknown knockoff flavor {self.flavor!r}")

    @property
    def rho(self):
        return self.param if self.design == "block2" else 0.0


@dataclass(frozen=True)
class ExponentPair:
    exp_fp: float
    exp_fn: float
    exp_hamm: float
    bound: bool = False

    @property
    def available(self):
        return not (np.any(np.isnan(self.exp_fp)) or np.any(np.isnan(self.exp_fn)))


@dataclass(frozen=True)
class PhaseCurves:
    theta: np.ndarray
    h_ar: np.ndarray
    h_er: np.ndarray
    branch: np.ndarray = field(repr=False)
    rho0: float = RHO0


@dataclass(frozen=True)
class VarianceProfile:
    omega: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray


def _pos(x):
    return np.maximum(x, 0.0)


def _xi(rho):
    return np.sqrt(1 - rho ** 2)


def _eta(rho):
    r = abs(rho)
    return np.sqrt((1 - r) / (1 + r))


def _lam(rho):
    return np.sqrt(1 - rho ** 2) - np.sqrt(1 - abs(rho))


# ---------------------------------------------------------------------------
# closed forms; u may be an array throughout

def _fp_path(u, r, theta, rho):
    # rate exponent (1 - exp_fp) of a false positive for Lasso-path ranking
    su, sr = np.sqrt(u), np.sqrt(r)
    return np.minimum(u, theta + (su - abs(rho) * sr) ** 2
                      + _pos(_xi(rho) * sr - _eta(rho) * su) ** 2 - _pos(sr - su) ** 2)


def _fn_gap(u, r, rho):
    su, sr = np.sqrt(u), np.sqrt(r)
    return _pos(sr - su) - _pos((1 - _xi(rho)) * sr - (1 - _eta(rho)) * su)


def _nested_neg(u, r, theta, rho):
    # both signals of a negatively correlated block present
    return 2 * theta + _pos(_xi(rho) * np.sqrt(r) - np.sqrt(u) / _eta(rho)) ** 2


def f_plus_hamm(u, r, theta, rho, return_branch=False):
    """
    Rate of the Hamming error for Lasso-path ranking in a 2x2 block design
    with nonnegative correlation: ``FP + FN = L_p p^{1 - f}``.

    With ``return_branch`` also returns the index of the smallest of the
    three terms and a flag for terms equal within 1e-9.
    """
    su, sr = np.sqrt(u), np.sqrt(r)
    terms = np.stack(np.broadcast_arrays(
        np.asarray(u, float),
        theta + (su - abs(rho) * sr) ** 2 + _pos(_xi(rho) * sr - _eta(rho) * su) ** 2
        - _pos(sr - su) ** 2,
        theta + _fn_gap(u, r, rho) ** 2))
    val = terms.min(axis=0)
    if not return_branch:
        return val
    srt = np.sort(terms, axis=0)
    return val, terms.argmin(axis=0), np.abs(srt[1] - srt[0]) < 1e-9


def _block2_omegas(rho, flavor):
    # (omega, omega1, omega2, sigma1, sigma2) of one 2x2 block and its knockoffs
    G = np.array([[1.0, rho], [rho, 1.0]])
    if flavor == "ci":
        s = 1 - rho ** 2
    else:
        s = min(1.0, 2 * (1 - abs(rho)))
    prof = variance_profile(G, np.full(2, s))
    return (prof.omega[0], prof.omega1[0], prof.omega2[0], prof.sigma1[0], prof.sigma2[0])


def _unsigned(spec, theta, r, u):
    m = spec.method
    a = spec.param if spec.design == "orthogonal" else 0.0
    rho = spec.rho
    u = np.asarray(u, float)
    su, sr = np.sqrt(u), np.sqrt(r)
    gap2 = _pos(sr - su) ** 2
    nan = np.full(u.shape, np.nan)
    if m == "bh_marginal":
        return 1 - u, 1 - theta - gap2, False
    if m == "knockoff_sgm":
        return 1 - u, 1 - theta - np.minimum((1 - abs(a)) * r / 2, gap2), False
    if m == "knockoff_dif":
        return 1 - u, 1 - theta - (1 - abs(a)) / 2 * gap2, False
    if m == "gm_dif":
        return 1 - u, 1 - theta - gap2 / 2, False
    if m == "gm_sgm":
        c = 1 - rho ** 2
        return 1 - c * u, 1 - theta - c * np.minimum(gap2, r / 2), False
    if m == "ols_prototype":
        c = 1 - rho ** 2
        return 1 - c * u, 1 - theta - c * gap2, False
    if m == "lassopath_prototype":
        fp = 1 - _fp_path(u, r, theta, rho)
        fn = theta + _fn_gap(u, r, rho) ** 2
        if rho < 0:
            fn = np.minimum(fn, _nested_neg(u, r, theta, rho))
        return fp, 1 - fn, False
    if m in ("knockoff_ols", "degm"):
        w, w1, w2, s1, s2 = _block2_omegas(rho, spec.flavor)
        v1, v2 = (w1, w2) if m == "knockoff_ols" else (s1, s2)
        if not np.isfinite(v1):
            raise TheoryError(f"{m} is undefined for a singular tampered design (rho={rho})")
        fn = theta + np.minimum(gap2 / v1, r / (2 * (v1 + abs(v2))))
        return 1 - u / v1, 1 - fn, True
    if m == "knockoff_ec":
        if abs(rho) >= 0.5:
            fp = 1 - _fp_path(u, r, theta, rho)
            body = _fn_gap(u, r, rho) - _pos(_lam(rho) * sr - _eta(rho) * su)
            fn = theta + body ** 2
            if rho < 0:
                fn = np.minimum(fn, 2 * theta)
            return fp, 1 - fn, False
        return nan, nan, False
    if m == "knockoff_ci":
        return nan, nan, False
    raise TheoryError(f"no closed form for {m}")


def _unsigned_hamm(spec, theta, r, u):
    fp, fn, bound = _unsigned(spec, theta, r, u)
    if not np.all(np.isnan(fp)):
        return np.maximum(fp, fn)
    rho = spec.rho
    f = f_plus_hamm(u, r, theta, rho)
    if rho < 0:
        f = np.minimum(f, _nested_neg(u, r, theta, rho))
        if spec.method == "knockoff_ec":
            f = np.minimum(f, 2 * theta + (1 + 2 * rho) ** 2 * (1 - rho) / (2 * (1 + rho)) * r)
    return 1 - f


def _check(theta, r, u):
    if not 0 < theta < 1:
        raise TheoryError(f"theta={theta} outside (0, 1)")
    if r < 0:
        raise TheoryError(f"r={r} must be nonnegative")
    if np.any(np.asarray(u) < 0):
        raise TheoryError("u must be nonnegative")


def _mirror(spec):
    return replace(spec, param=-spec.param, signed=False)


def fp_fn_exponents(spec, theta, r, u):
    """
    Exponents of ``FP_p(u)``, ``FN_p(u)`` and their sum.

    Equi-correlated knockoffs with ``|rho| < 1/2`` and CI knockoffs only have
    a combined Hamming exponent; their ``exp_fp``/``exp_fn`` are NaN.
    ``knockoff_ols`` and ``degm`` exponents are upper bounds (``bound=True``).
    In the signed model each exponent is the larger of the ``±|rho|`` ones.
    """
    _check(theta, r, u)
    if spec.signed and spec.design == "block2":
        base = replace(spec, signed=False)
        e1 = fp_fn_exponents(base, theta, r, u)
        e2 = fp_fn_exponents(_mirror(base), theta, r, u)
        return ExponentPair(np.fmax(e1.exp_fp, e2.exp_fp) if e1.available else e1.exp_fp,
                            np.fmax(e1.exp_fn, e2.exp_fn) if e1.available else e1.exp_fn,
                            np.maximum(e1.exp_hamm, e2.exp_hamm), e1.bound)
    fp, fn, bound = _unsigned(spec, theta, r, u)
    hamm = _unsigned_hamm(spec, theta, r, u)
    if np.ndim(fp) == 0:
        fp, fn, hamm = float(fp), float(fn), float(hamm)
    return ExponentPair(fp, fn, hamm, bound)


def hamming_exponent(spec, theta, r, u):
    """Exponent of ``FP_p(u) + FN_p(u)``."""
    return fp_fn_exponents(spec, theta, r, u).exp_hamm


def tradeoff_curve(spec, theta, r, u_grid):
    """
    FDR-TPR trade-off samples ``(g_tpr, g_fdr)`` over ``u_grid``.

    ``FDR_p = L_p p^{-g_fdr}`` with the number of true positives taken as
    ``p^{1-theta}``, and ``1 - TPR_p = L_p p^{-g_tpr}``.
    """
    u = np.asarray(u_grid, float)
    e = fp_fn_exponents(spec, theta, r, u)
    if not e.available:
        raise TheoryError(f"{spec.method} has no separate FP/FN exponents here")
    g_fdr = _pos((1 - theta) - np.asarray(e.exp_fp))
    g_tpr = (1 - theta) - np.asarray(e.exp_fn)
    return g_tpr, g_fdr


# ---------------------------------------------------------------------------
# optimal threshold

def _u_max(r):
    return 1.0 + 1.5 * max(r, 1.0)


def _golden(f, lo, hi, tol=1e-12):
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol})
    return res.x


def optimal_u(spec, theta, r, n_grid=10_000, tol=1e-12):
    """
    Threshold exponent minimizing the Hamming exponent over ``[0, U_max]``.

    A 10^4-point grid locates the minimum, a bounded scalar search refines
    it, and on a flat stretch the leftmost minimizer is found by bisection.
    """
    f = lambda u: float(hamming_exponent(spec, theta, r, u))
    grid = np.linspace(0.0, _u_max(r), n_grid)
    vals = np.asarray(hamming_exponent(spec, theta, r, grid))
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_grid - 1)]
    cand = _golden(f, lo, hi)
    best = min((f(cand), cand), (vals[i], grid[i]))
    vmin, ustar = best
    # leftmost point reaching the minimum
    j = int(np.argmax(vals <= vmin + tol))
    left = grid[j]
    if f(left) <= vmin + tol:
        if j == 0:
            return 0.0
        a, b = grid[j - 1], left
    else:
        a, b = grid[j], ustar
    if a > b:
        a, b = b, a
    for _ in range(200):
        mid = (a + b) / 2
        if f(mid) <= vmin + tol:
            b = mid
        else:
            a = mid
        if b - a < 1e-13:
            break
    return b if f(b) <= vmin + tol else ustar


def optimal_u_fplus(theta, r, rho):
    """Closed-form maximizer of ``f_plus_hamm`` over u (rho >= 0)."""
    rho = abs(rho)
    k = (np.sqrt(1 + rho) + np.sqrt(1 - rho)) ** 2
    if r < theta:
        return theta
    if theta <= 2 * rho * r / k:
        return (1 + rho) * r / k
    return (r + theta) ** 2 / (4 * r)


def min_hamming_exponent(spec, theta, r):
    """``f*_Hamm(theta, r)``: the Hamming exponent at the optimal threshold."""
    return float(hamming_exponent(spec, theta, r, optimal_u(spec, theta, r)))


# ---------------------------------------------------------------------------
# phase curves

def _h_path(theta, rho):
    x = np.sqrt(1 - theta)
    h1 = (1 + x) ** 2
    h2 = (1 + 1 / _eta(rho)) ** 2 * (1 - theta)
    cands = [h1, h2]
    if rho < 0:
        q = np.sqrt((1 + rho) / (1 - rho))
        h3 = np.where(theta < 0.5,
                      (q * np.sqrt(_pos(1 - 2 * theta)) + x / q) ** 2 / (1 + rho) ** 2, 0.0)
        cands.append(h3)
    stack = np.vstack(cands)
    return stack.max(axis=0), np.array(["h1", "h2", "h3"])[stack.argmax(axis=0)]


def _h5(theta, rho):
    return 2 * (1 - 2 * theta) * (1 + rho) / ((1 + 2 * rho) ** 2 * (1 - rho))


def _phase_unsigned(spec, theta):
    m = spec.method
    a = spec.param if spec.design == "orthogonal" else 0.0
    rho = spec.rho
    x = np.sqrt(1 - theta)
    base = (1 + x) ** 2
    tag = lambda s: np.full(theta.shape, s, dtype=object)
    if m in ("bh_marginal",):
        return theta, base, tag("bh")
    if m == "knockoff_sgm":
        alt = (2 - 2 * theta) / (1 - abs(a))
        return theta, np.maximum(alt, base), np.where(alt > base, "truncation", "bh").astype(object)
    if m == "knockoff_dif":
        return theta, (1 + np.sqrt((2 - 2 * theta) / (1 - abs(a)))) ** 2, tag("dif")
    if m == "gm_dif":
        return theta, (1 + np.sqrt(2 - 2 * theta)) ** 2, tag("dif")
    if m in ("gm_sgm", "ols_prototype"):
        c = 1 - rho ** 2
        return theta / c, base / c, tag("ols")
    if m in ("knockoff_ols", "degm"):
        w, w1, w2, s1, s2 = _block2_omegas(rho, spec.flavor)
        v1, v2 = (w1, w2) if m == "knockoff_ols" else (s1, s2)
        if not np.isfinite(v1):
            raise TheoryError(f"{m} is undefined for a singular tampered design (rho={rho})")
        er1 = v1 * base
        er2 = 2 * (v1 + abs(v2)) * (1 - theta)
        return v1 * theta, np.maximum(er1, er2), np.where(er2 > er1, "nested", "isolated").astype(object)
    if m in ("lassopath_prototype", "knockoff_ci"):
        h, br = _h_path(theta, rho)
        return theta, h, br.astype(object)
    if m == "knockoff_ec":
        h, br = _h_path(theta, rho)
        br = br.astype(object)
        if rho <= -0.5:
            inf = theta < 0.5
            return theta, np.where(inf, np.inf, h), np.where(inf, "inf", br)
        if rho < RHO0:
            h5 = _h5(theta, rho)
            return theta, np.maximum(h, h5), np.where(h5 > h, "h5", br)
        return theta, h, br
    raise TheoryError(f"no phase curves for {m}")


def phase_curves(spec, theta_grid=None):
    """
    Phase curves ``h_AR`` and ``h_ER`` sampled on ``theta_grid``
    (default: 201 interior points of (0, 1)).

    ``branch`` names the piece attaining ``h_ER`` (``inf`` where exact
    recovery is impossible).
    """
    if theta_grid is None:
        theta_grid = np.linspace(0.0, 1.0, 203)[1:-1]
    theta = np.asarray(theta_grid, float)
    if spec.signed and spec.design == "block2":
        ar1, er1, b1 = _phase_unsigned(replace(spec, signed=False), theta)
        ar2, er2, b2 = _phase_unsigned(_mirror(spec), theta)
        return PhaseCurves(theta, np.maximum(ar1, ar2), np.maximum(er1, er2),
                           np.where(er2 > er1, b2, b1))
    ar, er, br = _phase_unsigned(spec, theta)
    return PhaseCurves(theta, ar, er, br)


def _phase_point(spec, theta, level, r_hi=200.0, tol=1e-9):
    # smallest r with f*_Hamm(theta, r) < level
    g = lambda r: min_hamming_exponent(spec, theta, r) - level
    if g(r_hi) >= 0:
        return np.inf
    lo, hi = 0.0, r_hi
    while hi - lo > tol * max(1.0, hi):
        mid = (lo + hi) / 2
        if g(mid) < 0:
            hi = mid
        else:
            lo = mid
    return hi


def phase_curves_numeric(spec, theta_grid):
    """Phase curves from bisection on the optimized Hamming exponent."""
    theta = np.asarray(theta_grid, float)
    ar = np.array([_phase_point(spec, t, 1 - t) for t in theta])
    er = np.array([_phase_point(spec, t, 0.0) for t in theta])
    return PhaseCurves(theta, ar, er, np.full(theta.shape, "numeric", dtype=object))


# ---------------------------------------------------------------------------
# variance profile

def variance_profile(G, s=None, bundle=None):
    """
    Diagonal variances of the least-squares coefficients behind the
    least-squares, knockoff-OLS and de-randomized mirror rankers.

    ``omega`` is ``diag(G^{-1})``; ``omega1``/``omega2`` are the ``(j, j)``
    and ``(j, j+p)`` entries of the inverse knockoff Gram; ``sigma1``/
    ``sigma2`` are the entries of the 2x2 block of ``x_j`` and ``x~_j`` in
    the inverse Gram of ``[x_1..x_j, x~_j, x_{j+1}..x_p]``.

    Either ``s`` (knockoff diagonal) or a :class:`~fdrlab.tamper.KnockoffBundle`
    supplies the cross Gram; a bundle uses its realized matrices.
    """
    G = np.asarray(G, float)
    p = G.shape[0]
    H = linalg.inv(G)
    H = (H + H.T) / 2
    omega = np.diag(H).copy()
    if bundle is not None:
        K = bundle.X.T @ bundle.Xtilde
        T = bundle.Xtilde.T @ bundle.Xtilde
        sv = getattr(bundle.s, "s", bundle.s)
    else:
        sv = np.asarray(s, float)
        K = G - np.diag(sv)
        T = G
    # Gram of [X, X~] is [[G, K], [K', T]]; its inverse diagonal blocks
    # via the Schur complement of G
    schur = T - K.T @ H @ K
    try:
        w = linalg.eigvalsh(schur)
        singular = w[0] <= 1e-10 * max(1.0, w[-1])
    except linalg.LinAlgError:
        singular = True
    if singular:
        omega1 = np.full(p, np.inf)
        omega2 = np.full(p, np.nan)
    else:
        Sinv = linalg.inv(schur)
        HK = H @ K
        # top-left block: H + H K S^{-1} K' H ; top-right: -H K S^{-1}
        omega1 = omega + np.einsum("ij,jk,ik->i", HK, Sinv, HK)
        omega2 = -np.einsum("ij,ji->i", HK, Sinv)
    # residual Gram of (x_j, x~_j) after projecting out the other columns
    V = K.copy()
    np.fill_diagonal(V, 0.0)
    HV = H @ V
    hv = np.diag(HV)
    q = np.einsum("ij,ij->j", V, HV) - hv ** 2 / omega
    m11 = 1.0 / omega
    m12 = np.diag(K) + hv / omega
    m22 = np.diag(T) - q
    det = m11 * m22 - m12 ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma1 = np.where(det > 0, m22 / det, np.inf)
        sigma2 = np.where(det > 0, -m12 / det, np.nan)
    return VarianceProfile(omega, omega1, omega2, sigma1, sigma2)


# ---------------------------------------------------------------------------
# geometric oracle

def _block(rho):
    return np.array([[1.0, rho], [rho, 1.0]])


@lru_cache(maxsize=None)
def _quad_frame(rho):
    # maps (h_j, h_j+1, h~_j, h~_j+1) to (m, d1, d2), incl. the sign flip for rho < 0
    r = abs(rho)
    a = 2 * r - 1
    G4 = np.array([[1, rho, a, rho], [rho, 1, rho, a], [a, rho, 1, rho], [rho, a, rho, 1]], float)
    sg = 1.0 if rho >= 0 else -1.0
    T = np.array([[0.25, 0.25 * sg, 0.25, 0.25 * sg],
                  [0.5, 0, -0.5, 0],
                  [0, 0.5 * sg, 0, -0.5 * sg]])
    return T, G4


def oracle_setup(spec):
    """
    Coordinates for the geometric oracle of ``spec``.

    Returns ``(sigma, mean_map, pieces, rule, block)`` where ``mean_map`` sends
    ``(beta_j, beta_{j+1})`` in units of ``sqrt(r)`` to the mean of the
    standardized statistic, ``rule`` is ``("single", k)``, ``("sgm", k, kt)``
    or ``("dif", k, kt)`` and ``block`` says whether ``beta_{j+1}`` matters.
    """
    m = spec.method
    rho = spec.rho
    a = spec.param if spec.design == "orthogonal" else 0.0
    block = spec.design == "block2"
    if m == "bh_marginal":
        return np.eye(1), lambda b: np.array([b[0]]), regions.abs_pieces(1), ("single", 0), False
    if m in ("knockoff_sgm", "knockoff_dif"):
        S = _block(a)
        rule = ("sgm", 0, 1) if m.endswith("sgm") else ("dif", 0, 1)
        # entry times along the Lasso path of the pair (x_j, x~_j)
        return S, lambda b: np.array([b[0], a * b[0]]), regions.bivariate_pieces(a), rule, False
    if m in ("gm_sgm", "gm_dif"):
        # (coefficient of x_j, coefficient of the mirror direction), both with variance omega
        w = 1 / (1 - rho ** 2)
        rule = ("sgm", 0, 1) if m.endswith("sgm") else ("dif", 0, 1)
        return w * np.eye(2), lambda b: np.array([b[0], 0.0]), regions.abs_pieces(2), rule, block
    if m == "ols_prototype":
        B = _block(rho)
        return B, lambda b: B @ b, regions.ols_pieces(rho), ("single", 0), block
    if m == "lassopath_prototype":
        B = _block(rho)
        return B, lambda b: B @ b, regions.bivariate_pieces(rho), ("single", 0), block
    if m == "knockoff_ec" and abs(rho) >= 0.5:
        T, G4 = _quad_frame(rho)
        S = T @ G4 @ T.T
        return (S, lambda b: T @ G4[:, :2] @ b, regions.quad_pieces(rho), ("sgm", 0, 2), True)
    raise TheoryError(f"no geometric oracle for {m} on {spec.design} (rho={rho})")


def _regions_for(pieces, rule, u):
    if rule[0] == "single":
        return regions.single_region(pieces, rule[1], u)
    if rule[0] == "sgm":
        return regions.sgm_region(pieces, rule[1], rule[2], u)
    return regions.dif_region(pieces, rule[1], rule[2], u)


def oracle_distances(spec, r, u):
    """
    Ellipsoid distances of the most likely configurations.

    Returns a dict mapping ``(beta_j, beta_{j+1})`` (in units of ``sqrt(r)``)
    to the distance from the mean of the statistic to the rejection region
    when ``beta_j = 0`` and to its complement otherwise.  The values do not
    depend on ``theta``.
    """
    sigma, mean_map, pieces, rule, block = oracle_setup(spec)
    reg, comp = _regions_for(pieces, rule, u)
    # bj < 0 is the mirror image of bj > 0 under h -> -h
    levels = (-1.0, 0.0, 1.0) if spec.signed else (0.0, 1.0)
    others = levels if block else (0.0,)
    sr = np.sqrt(r)
    out = {}
    for bj in (0.0, 1.0):
        for bk in others:
            mu = mean_map(np.array([bj, bk]) * sr)
            out[bj, bk] = regions.ellipsoid_exponents(mu, sigma, reg if bj == 0 else comp)
    return out


def oracle_exponents(spec, theta, r, u, distances=None):
    """
    FP/FN exponents assembled from ellipsoid distances.

    For each configuration the distance from :func:`oracle_distances` is
    added to ``theta`` times the number of other signals involved; the
    smallest total sets the exponent.  ``theta`` may be an array.
    """
    d = oracle_distances(spec, r, u) if distances is None else distances
    theta = np.asarray(theta, float)
    fp_rate = np.full(theta.shape, np.inf)
    fn_rate = np.full(theta.shape, np.inf)
    for (bj, bk), b in d.items():
        tot = theta * (bk != 0) + b
        if bj == 0:
            fp_rate = np.minimum(fp_rate, tot)
        else:
            fn_rate = np.minimum(fn_rate, tot)
    fp, fn = 1 - fp_rate, 1 - theta - fn_rate
    if fp.ndim == 0:
        fp, fn = float(fp), float(fn)
    return ExponentPair(fp, fn, np.maximum(fp, fn))
