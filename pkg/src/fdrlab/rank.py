"""
Ranking algorithms: Lasso solution-path entry times and least squares.

The generic engine is an exact homotopy (LARS with the Lasso drop step)
working on the Gram matrix and ``X'y`` only.  Two closed forms cover the
small blocks that appear in block-diagonal designs: the bivariate path
and the degenerate four-variable path of equi-correlated knockoffs.
"""
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import linalg
from scipy.sparse import csgraph

ZERO_TOL = 1e-10
SINGULAR_TOL = 1e-10

OK, SINGULAR, NEGATIVE = 0, 1, 2


class SingularActiveSetError(np.linalg.LinAlgError):
    pass


class PathInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class EntryTimes:
    lambda_entry: np.ndarray


@dataclass(frozen=True)
class LSCoefficients:
    beta_hat: np.ndarray


@njit(cache=True)
def _chol_append(L, k, G, order, j):
    # extend the Cholesky factor of G[order[:k], order[:k]] by column j
    v = np.empty(k)
    for i in range(k):
        acc = G[order[i], j]
        for t in range(i):
            acc -= L[i, t] * v[t]
        v[i] = acc / L[i, i]
    d2 = G[j, j]
    for i in range(k):
        d2 -= v[i] * v[i]
    if d2 <= SINGULAR_TOL * G[j, j]:
        return False
    for i in range(k):
        L[k, i] = v[i]
    L[k, k] = np.sqrt(d2)
    return True


@njit(cache=True)
def _chol_solve(L, k, rhs):
    z = np.empty(k)
    for i in range(k):
        acc = rhs[i]
        for t in range(i):
            acc -= L[i, t] * z[t]
        z[i] = acc / L[i, i]
    x = np.empty(k)
    for i in range(k - 1, -1, -1):
        acc = z[i]
        for t in range(i + 1, k):
            acc -= L[t, i] * x[t]
        x[i] = acc / L[i, i]
    return x


@njit(cache=True)
def _chol_delete(L, k, i):
    # drop row/column i from a k x k lower Cholesky factor (Givens sweep)
    for r in range(i, k - 1):
        for t in range(k):
            L[r, t] = L[r + 1, t]
    for t in range(k):
        L[k - 1, t] = 0.0
    for t in range(i, k - 1):
        a = L[t, t]
        b = L[t, t + 1]
        hyp = np.hypot(a, b)
        cs = a / hyp
        sn = b / hyp
        for r in range(t, k - 1):
            x = L[r, t]
            y = L[r, t + 1]
            L[r, t] = cs * x + sn * y
            L[r, t + 1] = -sn * x + cs * y
        L[t, t + 1] = 0.0
    for r in range(k):
        L[r, k - 1] = 0.0


@njit(cache=True)
def _homotopy(G, xty, tol, skip_collinear):
    m = xty.shape[0]
    entry = np.zeros(m)
    c = xty.copy()
    lam = 0.0
    for j in range(m):
        lam = max(lam, abs(c[j]))
    if lam == 0.0:
        return entry, OK, -1
    zero = tol * lam
    entered = np.zeros(m, np.bool_)
    active = np.zeros(m, np.bool_)
    order = np.empty(m, np.int64)
    sgn = np.zeros(m)
    b = np.zeros(m)
    L = np.zeros((m, m))
    k = 0
    n_entered = 0
    joining = np.empty(m, np.int64)
    n_join = 0
    # tied to the boundary but linearly dependent on the active set
    tied = np.zeros(m, np.bool_)
    for j in range(m):
        if abs(c[j]) >= lam - zero:
            joining[n_join] = j
            n_join += 1

    while True:
        # admit every variable that reached the boundary at this breakpoint
        tied[:] = False
        for t in range(n_join):
            j = joining[t]
            if not entered[j]:
                entered[j] = True
                entry[j] = lam
                n_entered += 1
            if not _chol_append(L, k, G, order, j):
                if n_entered == m:
                    return entry, OK, -1
                if skip_collinear:
                    # its correlation stays at the boundary until the active set changes
                    tied[j] = True
                    continue
                return entry, SINGULAR, j
            order[k] = j
            k += 1
            active[j] = True
            sgn[j] = 1.0 if c[j] > 0 else -1.0
        if n_entered == m or lam <= zero:
            return entry, OK, -1

        s_a = np.empty(k)
        for i in range(k):
            s_a[i] = sgn[order[i]]
        w = _chol_solve(L, k, s_a)
        a = np.zeros(m)
        for i in range(k):
            col = order[i]
            wi = w[i]
            for j in range(m):
                a[j] += G[col, j] * wi

        gamma = lam
        for j in range(m):
            if active[j] or tied[j]:
                continue
            if 1.0 - a[j] > 1e-14:
                g = (lam - c[j]) / (1.0 - a[j])
                if zero < g < gamma:
                    gamma = g
            if 1.0 + a[j] > 1e-14:
                g = (lam + c[j]) / (1.0 + a[j])
                if zero < g < gamma:
                    gamma = g
        drop = -1
        for i in range(k):
            if w[i] != 0.0:
                g = -b[order[i]] / w[i]
                if zero < g < gamma:
                    gamma = g
                    drop = i

        for i in range(k):
            b[order[i]] += gamma * w[i]
        for j in range(m):
            c[j] -= gamma * a[j]
        lam -= gamma
        if lam < -zero:
            return entry, NEGATIVE, -1
        if lam < 0.0:
            lam = 0.0

        gone = -1
        if drop >= 0:
            gone = order[drop]
        # everything on the boundary joins together, including variables
        # whose correlation is tied to the active ones through a singular Gram
        n_join = 0
        for j in range(m):
            if not active[j] and j != gone and abs(c[j]) >= lam - zero:
                joining[n_join] = j
                n_join += 1

        if drop >= 0:
            gone = order[drop]
            b[gone] = 0.0
            active[gone] = False
            for i in range(drop, k - 1):
                order[i] = order[i + 1]
            k -= 1
            _chol_delete(L, k + 1, drop)


def lasso_entry_times(gram, xty, tol=ZERO_TOL, collinear="raise"):
    """
    Largest λ at which each coefficient is nonzero along the Lasso path.

    Parameters
    ----------
    gram : (m, m) array
        Gram matrix of the columns.
    xty : (m,) array
        Inner products of the columns with the response.
    collinear : {"raise", "skip"}
        What to do when a variable reaching the boundary is linearly
        dependent on the active set.  ``skip`` records its entry λ (the first
        λ with ``|x_j'r(λ)| = λ``, well defined because the fit is unique)
        and leaves it out of the active set while it stays dependent, as in
        the "drop collinear" rule of LARS.  Needed only for singular Grams.

    Raises
    ------
    SingularActiveSetError
        The path would need a singular active set before every variable has
        entered.  Degenerate equi-correlated knockoff blocks belong to
        :func:`quad_degenerate_path`.
    """
    G = np.ascontiguousarray(gram, dtype=float)
    h = np.ascontiguousarray(xty, dtype=float)
    if collinear not in ("raise", "skip"):
        raise ValueError(f"collinear must be 'raise' or 'skip', not {collinear!r}")
    entry, status, where = _homotopy(G, h, tol, collinear == "skip")
    if status == SINGULAR:
        raise SingularActiveSetError(
            f"active set becomes singular when variable {where} enters; "
            "use quad_degenerate_path for degenerate knockoff blocks")
    if status == NEGATIVE:
        raise PathInvariantError("homotopy produced a negative breakpoint")
    return EntryTimes(entry)


def gram_components(gram):
    """Connected components of the nonzero pattern of a Gram matrix."""
    G = np.asarray(gram)
    n_comp, labels = csgraph.connected_components(G != 0, directed=False)
    return [np.flatnonzero(labels == c) for c in range(n_comp)]


def blockwise_entry_times(gram, xty, tol=ZERO_TOL):
    """Homotopy run separately on each block of a block-diagonal Gram."""
    xty = np.asarray(xty, dtype=float)
    out = np.empty_like(xty)
    for idx in gram_components(gram):
        if idx.size == 1:
            out[idx] = abs(xty[idx])
        else:
            sub = np.asarray(gram)[np.ix_(idx, idx)]
            out[idx] = lasso_entry_times(sub, xty[idx], tol).lambda_entry
    return EntryTimes(out)


def bivariate_entry_times(h1, h2, rho):
    """Entry times (variable 1, variable 2) of the two-variable Lasso path."""
    if not -1 < rho < 1:
        raise ValueError(f"rho={rho} outside (-1, 1)")
    if rho < 0:
        return bivariate_entry_times(h1, -h2, -rho)
    a1, a2 = abs(h1), abs(h2)
    if a1 == a2:
        return a1, a2
    if a1 < a2:
        second, first = bivariate_entry_times(h2, h1, rho)
        return first, second
    # variable 1 leads; four sub-regions by the signs of h1 and h2 - rho*h1
    if h1 > 0:
        if h2 > rho * h1:
            lam2 = (h2 - rho * h1) / (1 - rho)
        else:
            lam2 = (rho * h1 - h2) / (1 + rho)
    else:
        if h2 > rho * h1:
            lam2 = (h2 - rho * h1) / (1 + rho)
        else:
            lam2 = (rho * h1 - h2) / (1 - rho)
    return a1, lam2


def bivariate_entry_times_vec(h1, h2, rho):
    """Vectorized :func:`bivariate_entry_times` for a common rho."""
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if rho < 0:
        h2 = -h2
        rho = -rho
    swap = np.abs(h2) > np.abs(h1)
    lead = np.where(swap, h2, h1)
    other = np.where(swap, h1, h2)
    up = other > rho * lead
    pos = lead > 0
    lam2 = np.where(
        up,
        (other - rho * lead) / np.where(pos, 1 - rho, 1 + rho),
        (rho * lead - other) / np.where(pos, 1 + rho, 1 - rho))
    lam2 = np.where(np.abs(h1) == np.abs(h2), np.abs(other), lam2)
    first = np.abs(lead)
    return np.where(swap, lam2, first), np.where(swap, first, lam2)


def quad_reparametrize(h, rho):
    """
    Map ``(x_j'y, x_{j+1}'y, x~_j'y, x~_{j+1}'y)`` to ``(m, d1, d2)``.

    For rho < 0 the second pair is sign-flipped first, which turns the block
    into the rho > 0 one.
    """
    h = np.asarray(h, dtype=float)
    sg = 1.0 if rho >= 0 else -1.0
    h1, h2, h3, h4 = h[..., 0], sg * h[..., 1], h[..., 2], sg * h[..., 3]
    m = (h1 + h2 + h3 + h4) / 4
    return m, (h1 - h3) / 2, (h2 - h4) / 2


def _quad_base(m, d1, d2, rho):
    # d1 >= d2 >= 0, 1/2 <= rho < 1; entry times of (x_j, x_j+1, x~_j, x~_j+1)
    bnd = rho * (d1 - d2) / (1 - rho)
    if m < 0 and m < -bnd:
        # mirror image of the last row under h -> -h and original <-> knockoff
        e = _quad_base(-m, d1, d2, rho)
        return np.array([e[2], e[3], e[0], e[1]])
    if m < 0:
        return np.array([(1 - rho) * m / rho + d1, d2, -m + d1, d2])
    if m <= bnd:
        return np.array([m + d1, d2, (rho - 1) * m / rho + d1, d2])
    lam1 = m + d1
    lam2 = m + (d2 - rho * d1) / (1 - rho)
    # the two knockoffs share one correlation once x_j and x_j+1 are active
    roots = [m - rho * (d1 + d2) / (1 - rho),
             (d1 + d2) / 2 - (1 - rho) * m / (2 * rho)]
    ok = [x for x in roots if 0 <= x <= lam2]
    lam3 = max(ok) if ok else 0.0
    return np.array([lam1, lam2, lam3, lam3])


def quad_degenerate_path(m, d1, d2, rho):
    """
    Entry times of the four-variable block ``(x_j, x_{j+1}, x~_j, x~_{j+1})``
    of an equi-correlated knockoff design with ``|rho| >= 1/2``.

    The statistics are ``(m+d1, m+d2, m-d1, m-d2)`` (second pair sign-flipped
    when rho < 0, see :func:`quad_reparametrize`).  Other orderings of
    ``(|d1|, |d2|)`` are reduced to ``d1 >= d2 >= 0`` by swapping a variable
    with its knockoff or the two pairs, all of which leave the Gram matrix
    unchanged.
    """
    if not 0.5 <= abs(rho) < 1:
        raise ValueError(f"degenerate path needs 1/2 <= |rho| < 1, got {rho}")
    rho = abs(rho)
    pos = [0, 1, 2, 3]
    if d1 < 0:
        d1 = -d1
        pos[0], pos[2] = pos[2], pos[0]
    if d2 < 0:
        d2 = -d2
        pos[1], pos[3] = pos[3], pos[1]
    if d1 < d2:
        d1, d2 = d2, d1
        pos = [pos[1], pos[0], pos[3], pos[2]]
    base = _quad_base(m, d1, d2, rho)
    out = np.empty(4)
    out[pos] = base
    return EntryTimes(out)


def least_squares(gram, xty):
    """
    Least-squares coefficients from the normal equations.

    A pivoted QR of the Gram matrix is used; a numerically singular Gram is
    an error rather than a pseudo-inverse.
    """
    G = np.asarray(gram, dtype=float)
    h = np.asarray(xty, dtype=float)
    Q, R, piv = linalg.qr(G, pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[-1] <= 1e-12 * diag[0]:
        raise np.linalg.LinAlgError(
            f"singular Gram matrix (rank-revealing ratio {diag[-1] / diag[0]:.2e})")
    z = linalg.solve_triangular(R, Q.T @ h)
    beta = np.empty_like(z)
    beta[piv] = z
    return LSCoefficients(beta)


def least_squares_xy(X, y):
    """Least-squares coefficients from raw data (X, y)."""
    X = getattr(X, "X", X)
    return least_squares(X.T @ X, X.T @ y)
