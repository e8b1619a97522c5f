"""
Tampered designs: fixed-X knockoffs and Gaussian-mirror column pairs.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .design import orthonormal_basis

FLAVORS = ("equicorrelated", "conditional_independence", "custom")
ALIASES = {"ec": "equicorrelated", "ci": "conditional_independence",
           "equi": "equicorrelated", "sdp": "equicorrelated"}
PSD_TOL = 1e-10
CLIP_TOL = 1e-12


class TamperError(ValueError):
    pass


@dataclass(frozen=True)
class SVector:
    s: np.ndarray
    flavor: str
    alpha: float = 1.0


@dataclass(frozen=True)
class KnockoffBundle:
    X: np.ndarray
    Xtilde: np.ndarray
    s: SVector
    gram: np.ndarray

    def tampered_gram(self):
        """Gram of ``[X, X~]`` as implied by ``G`` and ``s`` (exact zeros kept)."""
        G = self.gram
        off = G - np.diag(self.s.s)
        return np.block([[G, off], [off, G]])


@dataclass(frozen=True)
class GMAugmentation:
    j: int
    x_plus: np.ndarray
    x_minus: np.ndarray
    c_j: float
    z_j: np.ndarray = None


def _flavor(name):
    name = ALIASES.get(name, name)
    if name not in FLAVORS:
        raise TamperError(f"unknown knockoff flavor {name!r}")
    return name


def _min_eig(A):
    return linalg.eigvalsh(A, subset_by_index=[0, 0])[0]


def knockoff_s(G, flavor, s=None):
    """
    Diagonal ``s`` of the knockoff construction.

    ``equicorrelated`` uses ``min(1, 2 λmin(G))``; ``conditional_independence``
    uses ``α / diag(G^{-1})`` with the largest ``α ≤ 1`` keeping
    ``diag(s) ⪯ 2G``; ``custom`` validates a supplied vector.
    """
    G = np.asarray(G, dtype=float)
    p = G.shape[0]
    flavor = _flavor(flavor)
    if flavor == "equicorrelated":
        lam = _min_eig(G)
        if lam <= 0:
            raise TamperError(f"G is not positive definite (λmin={lam:.3e})")
        return SVector(np.full(p, min(1.0, 2 * lam)), flavor)
    if flavor == "custom":
        s = np.asarray(s, dtype=float)
        if s.shape != (p,) or np.any(s < 0):
            raise TamperError("custom s must be a nonnegative vector of length p")
        gap = _min_eig(2 * G - np.diag(s))
        if gap < -PSD_TOL:
            raise TamperError(f"diag(s) exceeds 2G (min eigenvalue of 2G - diag(s) is {gap:.3e})")
        return SVector(s, flavor)
    omega = np.diag(linalg.inv(G, check_finite=False))
    base = 1.0 / omega

    def feasible(a):
        return _min_eig(2 * G - a * np.diag(base)) >= 0

    if feasible(1.0):
        return SVector(base, flavor, 1.0)
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-10:
        mid = (lo + hi) / 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return SVector(lo * base, flavor, lo)


def build_knockoffs(X, s, seed):
    """
    Fixed-X knockoffs ``X~ = X(I - G^{-1}S) + U~ C``.

    ``U~`` has orthonormal columns orthogonal to ``X`` and ``C'C = 2S - S G^{-1} S``.
    """
    G = getattr(X, "gram", None)
    X = getattr(X, "X", X)
    n, p = X.shape
    if n < 2 * p:
        raise TamperError(f"knockoffs need n >= 2p (n={n}, p={p})")
    if G is None:
        G = X.T @ X
    sv = s if isinstance(s, SVector) else SVector(np.asarray(s, float), "custom")
    S = np.diag(sv.s)
    Ginv_S = linalg.solve(G, S, assume_a="pos")
    A = 2 * S - S @ Ginv_S
    A = (A + A.T) / 2
    w, V = linalg.eigh(A)
    scale = max(1.0, w[-1])
    if w[0] < -CLIP_TOL * scale:
        raise TamperError(f"2S - S G^-1 S is indefinite (λmin={w[0]:.3e})")
    # square root via the eigendecomposition tolerates the singular boundary case
    C = np.sqrt(np.clip(w, 0, None))[:, None] * V.T
    U = orthonormal_basis(n, p, np.random.default_rng(seed), against=X)
    Xt = X - X @ Ginv_S + U @ C
    return KnockoffBundle(X, Xt, sv, G)


def knockoffs_for(design, flavor, seed):
    """Knockoffs of a :class:`~fdrlab.design.DesignMatrix` for a named flavor."""
    return build_knockoffs(design, knockoff_s(design.gram, flavor), seed)


def _residual_basis(X, j):
    X_rest = np.delete(X, j, axis=1)
    Q, R = linalg.qr(X_rest, mode="economic")
    d = np.abs(np.diag(R))
    if d.size and d.min() <= 1e-10 * max(d.max(), 1.0):
        raise TamperError(f"X without column {j} is rank deficient")
    return Q


def _resid(Q, v):
    return v - Q @ (Q.T @ v)


def gm_augment(X, j, seed):
    """Randomized mirror pair ``x_j ± c_j z_j`` for variable ``j``."""
    X = getattr(X, "X", X)
    n, p = X.shape
    if n < p + 1:
        raise TamperError(f"Gaussian mirror needs n >= p+1 (n={n}, p={p})")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal(n)
    Q = _residual_basis(X, j)
    x = X[:, j]
    c = np.linalg.norm(_resid(Q, x)) / np.linalg.norm(_resid(Q, z))
    return GMAugmentation(j, x + c * z, x - c * z, float(c), z)


def degm_augment(X, Xtilde, j, tol=1e-6):
    """Deterministic mirror pair ``x_j ± x~_j``; needs matching residual norms."""
    X = getattr(X, "X", X)
    Q = _residual_basis(X, j)
    x, xt = X[:, j], Xtilde[:, j]
    nx, nt = np.linalg.norm(_resid(Q, x)), np.linalg.norm(_resid(Q, xt))
    if abs(nx - nt) > tol:
        raise TamperError(
            f"residual norms differ for variable {j}: {nx:.6g} vs {nt:.6g}")
    return GMAugmentation(j, x + xt, x - xt, 1.0, None)
