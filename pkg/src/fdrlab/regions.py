"""
Rejection regions as unions of polyhedra, and the Σ-metric distance from a
mean vector to such a union.

Each importance metric studied here is a positively homogeneous,
piecewise-linear function of a low-dimensional statistic (``x_j'y`` and a
few companions).  A :class:`Piece` records one linear piece: the polyhedron
``{x : A x <= c}`` on which it is valid and the matrix ``E`` with
``Z = E x`` there.  Rejection regions and their complements are then finite
unions of polyhedra, and the large-deviation exponent of landing in one is
the smallest squared Mahalanobis distance to any of them.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit
from scipy import linalg, optimize

FEAS_TOL = 1e-10


@dataclass(frozen=True)
class Polyhedron:
    """Closed polyhedron ``{x : A x <= c}``."""
    A: np.ndarray
    c: np.ndarray

    @property
    def dim(self):
        return self.A.shape[1]

    def intersect(self, A, c):
        A = np.atleast_2d(np.asarray(A, float))
        return Polyhedron(np.vstack([self.A, A]), np.concatenate([self.c, np.atleast_1d(c)]))

    def contains(self, x, tol=FEAS_TOL):
        return bool(np.all(self.A @ x <= self.c + tol))


@dataclass(frozen=True)
class Piece:
    poly: Polyhedron
    E: np.ndarray  # rows give the linear entry-time functions on this piece


@dataclass(frozen=True)
class EllipsoidProblem:
    """
    Parameters
    ----------
    mu : (d,) array
        Mean of the standardized statistic.
    sigma : (d, d) array
        Its covariance (before the ``1/(2 log p)`` scaling).
    pieces : list of Polyhedron
        The target set is their union.
    label : str
        Free-form description (``region`` or ``complement`` and the method).
    """
    mu: np.ndarray
    sigma: np.ndarray
    pieces: list = field(repr=False)
    label: str = ""


@dataclass(frozen=True)
class EllipsoidSolution:
    b: float
    inside: bool


@njit(cache=True)
def _small_solve(M, rhs, k, tol):
    # Cramer's rule for k <= 3, LAPACK otherwise; None-like flag when singular
    scale = 0.0
    for a in range(k):
        scale = max(scale, M[a, a])
    out = np.empty(k)
    if k == 1:
        det = M[0, 0]
        if abs(det) <= tol * scale:
            return out, False
        out[0] = rhs[0] / det
        return out, True
    if k == 2:
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) <= tol * scale ** 2:
            return out, False
        out[0] = (rhs[0] * M[1, 1] - M[0, 1] * rhs[1]) / det
        out[1] = (M[0, 0] * rhs[1] - rhs[0] * M[1, 0]) / det
        return out, True
    if k == 3:
        c00 = M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1]
        c01 = M[1, 2] * M[2, 0] - M[1, 0] * M[2, 2]
        c02 = M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0]
        det = M[0, 0] * c00 + M[0, 1] * c01 + M[0, 2] * c02
        if abs(det) <= tol * scale ** 3:
            return out, False
        c10 = M[0, 2] * M[2, 1] - M[0, 1] * M[2, 2]
        c11 = M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
        c12 = M[0, 1] * M[2, 0] - M[0, 0] * M[2, 1]
        c20 = M[0, 1] * M[1, 2] - M[0, 2] * M[1, 1]
        c21 = M[0, 2] * M[1, 0] - M[0, 0] * M[1, 2]
        c22 = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        out[0] = (c00 * rhs[0] + c10 * rhs[1] + c20 * rhs[2]) / det
        out[1] = (c01 * rhs[0] + c11 * rhs[1] + c21 * rhs[2]) / det
        out[2] = (c02 * rhs[0] + c12 * rhs[1] + c22 * rhs[2]) / det
        return out, True
    if abs(np.linalg.det(M)) <= tol * scale ** k:
        return out, False
    return np.linalg.solve(M, rhs), True


@njit(cache=True)
def _min_norm(A, c, tol):
    # smallest ||x||^2 over {A x <= c}: the minimizer is the min-norm point of
    # the affine hull of some linearly independent set of active rows
    m, d = A.shape
    feasible0 = True
    for i in range(m):
        if c[i] < -tol:
            feasible0 = False
            break
    if feasible0:
        return 0.0
    P = A @ A.T
    best = np.inf
    idx = np.zeros(d, np.int64)
    for k in range(1, min(d, m) + 1):
        # iterate over all k-subsets in lexicographic order
        for t in range(k):
            idx[t] = t
        M = np.empty((k, k))
        rhs = np.empty(k)
        while True:
            for a in range(k):
                rhs[a] = c[idx[a]]
                for b in range(k):
                    M[a, b] = P[idx[a], idx[b]]
            lam, ok = _small_solve(M, rhs, k, 1e-12)
            if ok:
                # x = A_S' lam, ||x||^2 = lam' M lam = lam' rhs
                val = 0.0
                for a in range(k):
                    val += lam[a] * rhs[a]
                if val < best:
                    x = np.zeros(d)
                    for a in range(k):
                        for q in range(d):
                            x[q] += lam[a] * A[idx[a], q]
                    for i in range(m):
                        acc = 0.0
                        for q in range(d):
                            acc += A[i, q] * x[q]
                        if acc > c[i] + tol * (1.0 + abs(c[i])):
                            ok = False
                            break
                    if ok:
                        best = val
            # next subset
            t = k - 1
            while t >= 0 and idx[t] == m - k + t:
                t -= 1
            if t < 0:
                break
            idx[t] += 1
            for s in range(t + 1, k):
                idx[s] = idx[s - 1] + 1
    return best


def _whiten(poly, mu, L):
    # x = L^{-1}(h - mu): a'h <= c  becomes  (a'L) x <= c - a'mu
    return poly.A @ L, poly.c - poly.A @ mu


def ellipsoid_exponent(problem):
    """
    ``inf (x-μ)'Σ^{-1}(x-μ)`` over the union of polyhedra in ``problem``.

    Returns an :class:`EllipsoidSolution`; ``inside`` is set (and ``b = 0``)
    when μ lies in the closure of the target set.  An empty union gives
    ``b = inf``.
    """
    mu = np.asarray(problem.mu, float)
    L = linalg.cholesky(np.asarray(problem.sigma, float), lower=True)
    best = np.inf
    for poly in problem.pieces:
        if poly.contains(mu):
            return EllipsoidSolution(0.0, True)
        A, c = _whiten(poly, mu, L)
        best = min(best, _min_norm(np.ascontiguousarray(A), np.ascontiguousarray(c), FEAS_TOL))
    return EllipsoidSolution(float(best), False)


def ellipsoid_exponents(mu, sigma, pieces):
    """Bare-float variant used by the grid oracles (no containment flag)."""
    return ellipsoid_exponent(EllipsoidProblem(mu, sigma, pieces)).b


# ---------------------------------------------------------------------------
# piecewise-linear entry-time maps

def _nonempty(poly):
    # Chebyshev-ball LP: a polyhedron counts only if it has an interior
    A, c = poly.A, poly.c
    norms = np.linalg.norm(A, axis=1)
    d = A.shape[1]
    # maximize radius r subject to A x + r |a| <= c, r <= 1
    obj = np.zeros(d + 1)
    obj[-1] = -1.0
    A_ub = np.hstack([A, norms[:, None]])
    res = optimize.linprog(obj, A_ub=A_ub, b_ub=c, bounds=[(None, None)] * d + [(0, 1)],
                           method="highs")
    return res.status == 0 and -res.fun > 1e-9


def _prune(pieces):
    return [pc for pc in pieces if _nonempty(pc.poly)]


def abs_pieces(d):
    """``Z_k = |x_k|`` for k < d: one piece per orthant."""
    out = []
    for signs in np.ndindex(*(2,) * d):
        s = np.where(np.array(signs) == 0, 1.0, -1.0)
        A = -np.diag(s)
        out.append(Piece(Polyhedron(A, np.zeros(d)), np.diag(s)))
    return out


def ols_pieces(rho):
    """Least-squares metric ``|h1 - ρ h2| / (1 - ρ²)`` on the pair ``(h1, h2)``."""
    f = np.array([1.0, -rho]) / (1 - rho ** 2)
    return [Piece(Polyhedron(-f[None, :], np.zeros(1)), f[None, :]),
            Piece(Polyhedron(f[None, :], np.zeros(1)), -f[None, :])]


@lru_cache(maxsize=None)
def bivariate_pieces(rho):
    """Eight linear pieces of the two-variable Lasso entry times."""
    r = abs(rho)
    pieces = []
    for lead in (0, 1):
        for s in (1.0, -1.0):
            e_lead = np.zeros(2)
            e_lead[lead] = s
            oth = np.zeros(2)
            oth[1 - lead] = 1.0
            # |h_lead| >= |h_other|, sign of h_lead = s
            cone = np.array([-e_lead + oth, -e_lead - oth])
            # split on the sign of h_other - r h_lead
            diff = oth - r * np.eye(2)[lead]
            up_den = 1 - r if s > 0 else 1 + r
            dn_den = 1 + r if s > 0 else 1 - r
            for A_extra, form in ((-diff, diff / up_den), (diff, -diff / dn_den)):
                A = np.vstack([cone, A_extra])
                E = np.zeros((2, 2))
                E[lead] = e_lead
                E[1 - lead] = form
                pieces.append(Piece(Polyhedron(A, np.zeros(3)), E))
    if rho < 0:
        F = np.diag([1.0, -1.0])
        pieces = [Piece(Polyhedron(pc.poly.A @ F, pc.poly.c), pc.E @ F) for pc in pieces]
    return tuple(_prune(pieces))


def _quad_base_pieces(rho):
    # pieces of the base path in (m, D1, D2) with D1 >= D2 >= 0
    r = rho
    mvec, D1, D2 = np.eye(3)
    zero = np.zeros(3)
    bnd = r * (D1 - D2) / (1 - r)
    out = []

    def row_d(sign):
        # rows for m' = sign * m >= bnd; returns list of (constraints, [lam1, lam2, lam3])
        mp = sign * mvec
        lam1 = mp + D1
        lam2 = mp + (D2 - r * D1) / (1 - r)
        r1 = mp - r * (D1 + D2) / (1 - r)
        r2 = (D1 + D2) / 2 - (1 - r) * mp / (2 * r)
        region = [bnd - mp]  # bnd - m' <= 0
        valid1 = [-r1, r1 - lam2]
        valid2 = [-r2, r2 - lam2]
        invalid1 = [[r1], [lam2 - r1]]
        invalid2 = [[r2], [lam2 - r2]]
        res = []
        for extra in ([r2 - r1], [r2], [lam2 - r2]):
            res.append((region + valid1 + extra, lam1, lam2, r1))
        for extra in ([r1 - r2], [r1], [lam2 - r1]):
            res.append((region + valid2 + extra, lam1, lam2, r2))
        for a in invalid1:
            for b in invalid2:
                res.append((region + a + b, lam1, lam2, zero))
        return res

    for cons, l1, l2, l3 in row_d(1.0):
        out.append((cons, np.array([l1, l2, l3, l3])))
    for cons, l1, l2, l3 in row_d(-1.0):
        # mirror: knockoffs lead, originals share the third entry time
        out.append((cons, np.array([l3, l3, l1, l2])))
    out.append(([-bnd - mvec, mvec], np.array([(1 - r) * mvec / r + D1, D2, -mvec + D1, D2])))
    out.append(([-mvec, mvec - bnd], np.array([mvec + D1, D2, (r - 1) * mvec / r + D1, D2])))
    return out


@lru_cache(maxsize=None)
def quad_pieces(rho):
    """
    Linear pieces of the degenerate four-variable knockoff path in the
    coordinates ``(m, d1, d2)``; entry times ordered
    ``(x_j, x_{j+1}, x~_j, x~_{j+1})``.
    """
    r = abs(rho)
    base = _quad_base_pieces(r)
    pieces = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            for swap in (False, True):
                pos = [0, 1, 2, 3]
                if s1 < 0:
                    pos[0], pos[2] = pos[2], pos[0]
                if s2 < 0:
                    pos[1], pos[3] = pos[3], pos[1]
                # P maps (m, d1, d2) to (m, D1, D2)
                a1 = np.array([0.0, s1, 0.0])
                a2 = np.array([0.0, 0.0, s2])
                if swap:
                    P = np.array([[1.0, 0, 0], a2, a1])
                    pos = [pos[1], pos[0], pos[3], pos[2]]
                else:
                    P = np.array([[1.0, 0, 0], a1, a2])
                cone = [-a1, -a2, (P[2] - P[1])]  # D1 >= 0, D2 >= 0, D1 >= D2
                for cons, forms in base:
                    A = np.vstack([np.array(cone)] + [np.atleast_2d(np.asarray(cons) @ P)])
                    E = np.empty((4, 3))
                    E[pos] = forms @ P
                    pieces.append(Piece(Polyhedron(A, np.zeros(A.shape[0])), E))
    return tuple(_prune(pieces))


# ---------------------------------------------------------------------------
# regions from pieces

def single_region(pieces, k, u):
    """Where ``Z_k > √u`` (the prototype rule), and its complement."""
    t = np.sqrt(u)
    reg, comp = [], []
    for pc in pieces:
        reg.append(pc.poly.intersect(-pc.E[k], -t))
        comp.append(pc.poly.intersect(pc.E[k], t))
    return reg, comp


def sgm_region(pieces, k, kt, u, ties="member"):
    """
    Signed-maximum rejection region for the pair ``(Z_k, Z_kt)``.

    Ties ``Z_k = Z_kt`` lie on a hyperplane for continuous data, except on
    pieces where the two entry times coincide identically (degenerate
    knockoffs).  Those pieces are members with ``ties="member"`` (a coin-flip
    tie rule seen at the exponent level) and never selected with
    ``ties="negative"``.
    """
    t = np.sqrt(u)
    reg, comp = [], []
    for pc in pieces:
        diff = pc.E[k] - pc.E[kt]
        if np.max(np.abs(diff)) < 1e-12:
            if ties == "member":
                reg.append(pc.poly.intersect(-pc.E[k], -t))
                comp.append(pc.poly.intersect(pc.E[k], t))
            else:
                comp.append(pc.poly)
            continue
        reg.append(pc.poly.intersect(np.vstack([-diff, -pc.E[k]]), [0.0, -t]))
        comp.append(pc.poly.intersect(diff, 0.0))
        comp.append(pc.poly.intersect(pc.E[k], t))
    return reg, comp


def dif_region(pieces, k, kt, u):
    """Rejection region and its complement for the difference statistic."""
    t = np.sqrt(u)
    reg, comp = [], []
    for pc in pieces:
        diff = pc.E[k] - pc.E[kt]
        reg.append(pc.poly.intersect(-diff, -t))
        comp.append(pc.poly.intersect(diff, t))
    return reg, comp


def rejection_region_membership(h1, h2, rho, u, which="lasso_path"):
    """
    Whether ``(h1, h2)`` (standardized ``x_j'y``, ``x_{j+1}'y``) leads to
    selecting variable ``j`` at threshold ``√u`` in a 2x2 block design.

    ``lasso_path`` uses the four half-space pieces of the two-variable path;
    ``ols`` the two slabs of the least-squares coefficient.
    """
    if not -1 < rho < 1:
        raise ValueError(f"rho={rho} outside (-1, 1)")
    t = np.sqrt(u)
    if which == "ols":
        return bool(abs(h1 - rho * h2) > (1 - rho ** 2) * t)
    if which != "lasso_path":
        raise ValueError(f"unknown region {which!r}")
    if rho < 0:
        return rejection_region_membership(h1, -h2, -rho, u, which)
    g = h1 - rho * h2
    return bool((g > (1 - rho) * t and h1 > t) or g > (1 + rho) * t
                or (g < -(1 - rho) * t and h1 < -t) or g < -(1 + rho) * t)
