"""
Importance scores, data-driven thresholds and error summaries.

Knockoff scores combine the ranker outputs ``(Z_j, Z~_j)`` with an
antisymmetric statistic; mirror scores combine the two least-squares
coefficients of the column pair ``x_j ± f_j``.  Both feed the same
threshold functional.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import rank
from .tamper import TamperError

STAT_KINDS = {"sgm": "signed_max", "signed_max": "signed_max",
              "dif": "difference", "difference": "difference"}


@dataclass(frozen=True)
class ScoreVector:
    scores: np.ndarray
    stat_kind: str
    method_tag: str
    z: np.ndarray = field(default=None, repr=False)
    ztilde: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class SelectionResult:
    selected: np.ndarray
    threshold: float
    mode: str
    level: float


@dataclass(frozen=True)
class ErrorCounts:
    fp: int
    fn: int
    tp: int

    @property
    def hamming(self):
        return self.fp + self.fn

    @property
    def fdp(self):
        return self.fp / max(self.fp + self.tp, 1)

    @property
    def tpr(self):
        return self.tp / max(self.tp + self.fn, 1)


def _kind(kind):
    try:
        return STAT_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown statistic {kind!r}") from None


def signed_max(z, ztilde):
    """``max(z, z~)`` signed by which of the two is larger; ties go negative."""
    z = np.asarray(z, dtype=float)
    zt = np.asarray(ztilde, dtype=float)
    if np.any(z < 0) or np.any(zt < 0):
        raise ValueError("signed_max expects nonnegative inputs")
    out = np.where(z > zt, z, -zt)
    # keep a clean zero for the (0, 0) tie
    out = out + 0.0
    return out if out.ndim else float(out)


def difference(z, ztilde):
    """Difference statistic z - ztilde."""
    out = np.asarray(z, dtype=float) - np.asarray(ztilde, dtype=float)
    return out if out.ndim else float(out)


def combine(z, ztilde, kind):
    """Combine paired importances with the named statistic (``sgm`` or ``dif``)."""
    return signed_max(z, ztilde) if _kind(kind) == "signed_max" else difference(z, ztilde)


def mirror_stat(b_plus, b_minus, kind):
    """
    Mirror statistic from the two copies b+ and b- of a coefficient.

    ``sgm`` gives (|b+| + |b-|) sign(b+ b-); ``dif`` gives |b+ + b-| - |b+ - b-|.
    """
    bp = np.asarray(b_plus, dtype=float)
    bm = np.asarray(b_minus, dtype=float)
    if _kind(kind) == "difference":
        out = np.abs(bp + bm) - np.abs(bp - bm)
    else:
        out = (np.abs(bp) + np.abs(bm)) * np.sign(bp) * np.sign(bm)
    out = out + 0.0
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- knockoffs

class PathPlan:
    """
    Block structure of a tampered Gram matrix, worked out once per design.

    Degenerate equi-correlated blocks go to the closed-form four-variable
    path; everything else runs through the homotopy block by block.
    """

    def __init__(self, gram, p=None):
        G = np.asarray(gram, dtype=float)
        self.m = G.shape[0]
        self.single = []
        self.quads = []
        self.blocks = []
        for idx in rank.gram_components(G):
            if idx.size == 1:
                self.single.append(idx[0])
                continue
            sub = np.ascontiguousarray(G[np.ix_(idx, idx)])
            rho = self._degenerate_rho(idx, sub, p)
            if rho is not None:
                self.quads.append((idx, rho))
            else:
                self.blocks.append((idx, sub, self._collinear_rule(sub)))
        self.single = np.array(self.single, dtype=int)

    @staticmethod
    def _degenerate_rho(idx, sub, p):
        if p is None or idx.size != 4:
            return None
        j = idx[0]
        if list(idx) != [j, j + 1, j + p, j + p + 1]:
            return None
        rho = sub[0, 1]
        a = 2 * abs(rho) - 1
        pattern = np.array([[1, rho, a, rho], [rho, 1, rho, a],
                            [a, rho, 1, rho], [rho, a, rho, 1]])
        if abs(rho) >= 0.5 and np.allclose(sub, pattern, atol=1e-12, rtol=0):
            return rho
        return None

    @staticmethod
    def _collinear_rule(sub):
        # singular blocks outside the four-variable pattern (e.g. equi-correlated
        # knockoffs on a factor design) are run with the drop-collinear rule
        w = linalg.eigvalsh(sub)
        return "skip" if w[0] <= 1e-9 * max(1.0, w[-1]) else "raise"

    def entry_times(self, xty):
        h = np.asarray(xty, dtype=float)
        out = np.empty(self.m)
        out[self.single] = np.abs(h[self.single])
        for idx, rho in self.quads:
            m, d1, d2 = rank.quad_reparametrize(h[idx], rho)
            out[idx] = rank.quad_degenerate_path(m, d1, d2, rho).lambda_entry
        for idx, sub, rule in self.blocks:
            out[idx] = rank.lasso_entry_times(sub, h[idx], collinear=rule).lambda_entry
        return out


def knockoff_scores(bundle, y, ranker="lasso_path", kind="sgm", plan=None):
    """
    Knockoff importance scores ``W_j = f(Z_j, Z~_j)``.

    ``ranker`` is ``lasso_path`` (entry times on ``[X, X~]``) or
    ``least_squares`` (absolute coefficients of the 2p-column regression).
    """
    X, Xt = bundle.X, bundle.Xtilde
    p = X.shape[1]
    xty = np.concatenate([X.T @ y, Xt.T @ y])
    ranker = ranker.replace("-", "_")
    if ranker == "lasso_path":
        if plan is None:
            plan = PathPlan(bundle.tampered_gram(), p)
        ent = plan.entry_times(xty)
    elif ranker == "least_squares":
        ent = np.abs(rank.least_squares(bundle.tampered_gram(), xty).beta_hat)
    else:
        raise ValueError(f"unknown ranker {ranker!r}")
    z, zt = ent[:p], ent[p:]
    return ScoreVector(combine(z, zt, kind), _kind(kind), f"knockoff/{ranker}", z, zt)


def prototype_scores(X, y, ranker="lasso_path", plan=None):
    """Untampered rankers: Lasso entry times or absolute least-squares coefficients."""
    G = getattr(X, "gram", None)
    X = getattr(X, "X", X)
    if G is None:
        G = X.T @ X
    xty = X.T @ y
    ranker = ranker.replace("-", "_")
    if ranker == "lasso_path":
        if plan is None:
            plan = PathPlan(G)
        s = plan.entry_times(xty)
    elif ranker == "least_squares":
        s = np.abs(rank.least_squares(G, xty).beta_hat)
    else:
        raise ValueError(f"unknown ranker {ranker!r}")
    return ScoreVector(s, "none", f"prototype/{ranker}", s, None)


# ----------------------------------------------------------- Gaussian mirror

class MirrorBasis:
    """
    QR of ``X`` and the pieces of ``G^{-1}`` every mirror regression reuses.

    With ``X = QR``, ``G^{-1} X' f = R^{-1} Q' f``, so one product ``Q'F``
    carries everything the p regressions need.
    """

    def __init__(self, X):
        X = getattr(X, "X", X)
        n, p = X.shape
        if n < p + 1:
            raise TamperError(f"Gaussian mirror needs n >= p+1 (n={n}, p={p})")
        self.X = X
        self.Q, R = linalg.qr(X, mode="economic")
        d = np.abs(np.diag(R))
        if d.min() <= 1e-10 * d.max():
            raise TamperError("design is rank deficient")
        self.Rinv = linalg.solve_triangular(R, np.eye(p))
        self.omega = np.einsum("ij,ij->i", self.Rinv, self.Rinv)

    def _split(self, F):
        QtF = self.Q.T @ F
        a = np.einsum("jk,kj->j", self.Rinv, QtF)
        rr = np.einsum("ij,ij->j", F, F) - np.einsum("ij,ij->j", QtF, QtF)
        return QtF, a, rr

    def coefficients(self, F, y):
        """
        Coefficients on ``x_j`` and ``f_j`` when y is regressed on ``[X, f_j]``.

        Splitting ``f_j = X g_j + r_j`` with ``r_j`` orthogonal to ``X`` gives
        ``b2 = r_j'y / |r_j|^2`` and ``b1 = (G^{-1}X'y)_j - (g_j)_j b2``.
        """
        QtF, a, rr = self._split(F)
        Qty = self.Q.T @ y
        b2 = (F.T @ y - QtF.T @ Qty) / rr
        b1 = self.Rinv @ Qty - a * b2
        return b1, b2

    def mirror_coefficients(self, Z, y):
        """
        ``(b1, b2)`` for the randomized mirror with raw directions ``Z``.

        Rescaling ``z_j`` by ``c_j`` leaves ``b1`` alone and divides ``b2`` by
        ``c_j``, so a single pass over ``Q'Z`` gives both the scales and the fits.
        """
        QtZ, a, rr = self._split(Z)
        Qty = self.Q.T @ y
        b2 = (Z.T @ y - QtZ.T @ Qty) / rr
        b1 = self.Rinv @ Qty - a * b2
        c = (1 / np.sqrt(self.omega)) / np.sqrt(rr + a * a / self.omega)
        return b1, b2 / c, c

    def residual_norms(self, F):
        """``|(I - P_{-j}) f_j|`` for every column of F."""
        _, a, rr = self._split(F)
        return np.sqrt(rr + a * a / self.omega)


def _coefficients_direct(X, F, y):
    # literal per-j regressions on [X_{-j}, x_j + f_j, x_j - f_j]
    p = X.shape[1]
    bp, bm = np.empty(p), np.empty(p)
    for j in range(p):
        A = np.column_stack([np.delete(X, j, axis=1), X[:, j] + F[:, j], X[:, j] - F[:, j]])
        coef = linalg.lstsq(A, y)[0]
        bp[j], bm[j] = coef[-2], coef[-1]
    return bp, bm


def gm_directions(X, seed, basis=None):
    """Scaled random directions ``c_j z_j`` of the randomized mirror."""
    X = getattr(X, "X", X)
    basis = basis or MirrorBasis(X)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Z = rng.standard_normal(X.shape)
    c = (1 / np.sqrt(basis.omega)) / basis.residual_norms(Z)
    return Z * c


def _mirror_scores(X, F, y, kind, tag, basis=None, direct=False):
    if direct:
        bp, bm = _coefficients_direct(X, F, y)
    else:
        b1, b2 = (basis or MirrorBasis(X)).coefficients(F, y)
        bp, bm = (b1 + b2) / 2, (b1 - b2) / 2
    return ScoreVector(mirror_stat(bp, bm, kind), _kind(kind), tag, bp, bm)


def gm_scores(X, y, kind="sgm", seed=None, basis=None, direct=False):
    """Randomized Gaussian-mirror scores, one (p+1)-column regression per variable."""
    X = getattr(X, "X", X)
    basis = basis or MirrorBasis(X)
    if direct:
        return _mirror_scores(X, gm_directions(X, seed, basis), y, kind, "gm", basis, True)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    b1, b2, _ = basis.mirror_coefficients(rng.standard_normal(X.shape), y)
    bp, bm = (b1 + b2) / 2, (b1 - b2) / 2
    return ScoreVector(mirror_stat(bp, bm, kind), _kind(kind), "gm", bp, bm)


def degm_scores(X, Xtilde, y, kind="sgm", basis=None, direct=False, tol=1e-6):
    """De-randomized mirror scores using knockoff columns as the mirror directions."""
    X = getattr(X, "X", X)
    basis = basis or MirrorBasis(X)
    gap = np.abs(basis.residual_norms(Xtilde) - 1 / np.sqrt(basis.omega))
    if gap.max() > tol:
        j = int(np.argmax(gap))
        raise TamperError(f"residual norms differ for variable {j} by {gap[j]:.3e}")
    return _mirror_scores(X, Xtilde, y, kind, "degm", basis, direct)


# ---------------------------------------------------------------- selection

def _scores(s):
    return np.asarray(getattr(s, "scores", s), dtype=float)


def fdr_threshold(scores, q):
    """Smallest candidate ``t`` with #{W < -t} / max(#{W > t}, 1) <= q, else inf."""
    w = _scores(scores)
    cand = np.unique(np.abs(w[w != 0]))
    if cand.size == 0:
        return np.inf
    srt = np.sort(w)
    neg = np.searchsorted(srt, -cand, side="left")
    pos = w.size - np.searchsorted(srt, cand, side="right")
    ok = np.flatnonzero(neg <= q * np.maximum(pos, 1))
    return float(cand[ok[0]]) if ok.size else np.inf


def select_at_fdr(scores, q):
    """
    Data-driven selection at target FDR level q.

    Returns
    -------
    SelectionResult
        Indices with W >= T, where T is the smallest candidate |W_j| whose
        estimated false discovery proportion is at most q (inf if none).
    """
    if not 0 < q < 1:
        raise ValueError(f"q={q} outside (0, 1)")
    w = _scores(scores)
    T = fdr_threshold(w, q)
    return SelectionResult(np.flatnonzero(w >= T), T, "fdr_q", q)


def select_at_u(scores, u, p=None):
    """Select W_j > sqrt(2 u log p) at a fixed threshold exponent u."""
    w = _scores(scores)
    p = w.size if p is None else p
    t = np.sqrt(2 * u * np.log(p))
    return SelectionResult(np.flatnonzero(w > t), float(t), "fixed_u", u)


def evaluate(selection, beta):
    """False positives, false negatives and true positives of a selection."""
    sel = np.zeros(len(getattr(beta, "beta", beta)), dtype=bool)
    sel[getattr(selection, "selected", selection)] = True
    support = getattr(beta, "support", None)
    truth = np.zeros_like(sel)
    if support is None:
        truth[np.flatnonzero(beta)] = True
    else:
        truth[support] = True
    tp = int(np.sum(sel & truth))
    return ErrorCounts(fp=int(np.sum(sel & ~truth)), fn=int(np.sum(~sel & truth)), tp=tp)
