"""
Design families and their explicit realizations.

A design is described by its Gram matrix ``G`` (unit diagonal). Every
statistic in this package depends on the design only through ``G`` and
``X'y``, so any ``X`` with ``X'X = G`` will do; :func:`realize_design`
builds one from a Cholesky factor and a random orthonormal basis.
"""
from dataclasses import dataclass, field

import numpy as np

KINDS = ("orthogonal", "block2", "block_d", "factor", "expdecay", "wishart")


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class DesignSpec:
    """
    Parameters
    ----------
    kind : str
        One of ``orthogonal``, ``block2``, ``block_d``, ``factor``,
        ``expdecay``, ``wishart``.
    p, n : int
        Number of variables and of observations.
    rho : float
        Correlation parameter (block2, block_d, expdecay).
    d : int
        Block size for ``block_d``.
    k : int
        Number of factors for ``factor``.
    seed : int
        Seed for the random families (factor, wishart).
    """
    kind: str
    p: int
    n: int
    rho: float = 0.0
    d: int = 2
    k: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DesignError(f"unknown design kind {self.kind!r}")
        if self.p < 2:
            raise DesignError("p must be at least 2")
        if self.n < self.p:
            raise DesignError(f"n={self.n} is smaller than p={self.p}")
        if not -1 < self.rho < 1:
            raise DesignError(f"rho={self.rho} outside (-1, 1)")
        if self.kind == "block_d":
            if self.d < 2 or self.p % self.d:
                raise DesignError(f"block size d={self.d} must be >= 2 and divide p={self.p}")
        if self.kind == "factor" and self.k < 1:
            raise DesignError("factor model needs k >= 1")

    @classmethod
    def from_dict(cls, cfg):
        return cls(**cfg)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p, "n": self.n, "rho": self.rho,
                "d": self.d, "k": self.k, "seed": self.seed}


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    gram: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def _block_diag_const(p, d, rho):
    G = np.eye(p)
    for start in range(0, p - d + 1, d):
        blk = slice(start, start + d)
        G[blk, blk] = rho
        G[range(start, start + d), range(start, start + d)] = 1.0
    return G


def make_gram(spec):
    """Gram matrix of the design family described by ``spec``."""
    p, rho = spec.p, spec.rho
    kind = spec.kind
    if kind == "orthogonal":
        G = np.eye(p)
    elif kind == "block2":
        # odd p leaves the last variable alone
        G = _block_diag_const(p, 2, rho)
    elif kind == "block_d":
        G = _block_diag_const(p, spec.d, rho)
    elif kind == "expdecay":
        idx = np.arange(p)
        G = rho ** np.abs(idx[:, None] - idx[None, :])
    elif kind == "factor":
        rng = np.random.default_rng(spec.seed)
        if spec.k == 2:
            alpha = rng.uniform(0.0, 2 * np.pi, size=p)
            B = np.column_stack([np.cos(alpha), np.sin(alpha)])
        else:
            B = rng.standard_normal((p, spec.k))
            B /= np.linalg.norm(B, axis=1, keepdims=True)
        G = (B @ B.T + np.eye(p)) / 2
        dg = np.sqrt(np.diag(G))
        G = G / np.outer(dg, dg)
    else:
        rng = np.random.default_rng(spec.seed)
        while True:
            Z = rng.standard_normal((spec.n, p))
            G = np.corrcoef(Z, rowvar=False)
            if np.linalg.eigvalsh(G)[0] > 1e-6:
                break
    G = (G + G.T) / 2
    np.fill_diagonal(G, 1.0)
    lam = np.linalg.eigvalsh(G)[0]
    if lam <= 0:
        raise DesignError(
            f"{kind} Gram is not positive definite (smallest eigenvalue {lam:.3e})")
    return G


def min_eigenvalue(G):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(G)[0])


def orthonormal_basis(n, p, rng, against=None):
    """n x p matrix with orthonormal columns, orthogonal to ``against`` if given."""
    A = rng.standard_normal((n, p))
    if against is not None:
        Q0, _ = np.linalg.qr(against)
        A -= Q0 @ (Q0.T @ A)
        # second pass keeps the complement clean to machine precision
        A -= Q0 @ (Q0.T @ A)
    Q, R = np.linalg.qr(A)
    # fix signs so the basis is a deterministic function of A
    Q *= np.sign(np.diag(R))
    return Q


def realize_design(G, n, seed):
    """Explicit ``X`` (n x p) with ``X'X = G`` and unit-norm columns."""
    G = np.asarray(G, dtype=float)
    p = G.shape[0]
    if n < p:
        raise DesignError(f"n={n} is smaller than p={p}")
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise DesignError(
            f"Cholesky failed; smallest eigenvalue {min_eigenvalue(G):.3e}") from None
    # separate stream from the one that may have generated G itself
    Q = orthonormal_basis(n, p, np.random.default_rng([seed, 1]))
    X = Q @ L.T
    err = np.max(np.abs(X.T @ X - G))
    if err >= 1e-8:
        raise DesignError(f"realized design misses its Gram by {err:.2e}")
    return DesignMatrix(X, G)


def design_from_spec(spec):
    """Gram and realized design for a ``DesignSpec``."""
    return realize_design(make_gram(spec), spec.n, spec.seed)


def block2_neighbor(p):
    """Index of the block partner of each variable (itself for a lone last one)."""
    idx = np.arange(p)
    nb = idx ^ 1
    nb[nb >= p] = idx[nb >= p]
    return nb
