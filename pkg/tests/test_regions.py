import numpy as np
import pytest
import cvxpy as cp

from fdrlab import rank, regions
from fdrlab.regions import EllipsoidProblem, Polyhedron, ellipsoid_exponent


def qp_distance(mu, sigma, poly):
    # independent route: generic convex QP solver
    x = cp.Variable(mu.size)
    P = np.linalg.inv(sigma)
    P = (P + P.T) / 2
    prob = cp.Problem(cp.Minimize(cp.quad_form(x - mu, P)), [poly.A @ x <= poly.c])
    prob.solve()
    return prob.value


def test_halfspace_closed_form():
    # inf over {a'x >= t} is (t - a'mu)^2 / a'Σa
    sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
    mu = np.array([0.2, -0.1])
    a = np.array([1.0, 2.0])
    poly = Polyhedron(-a[None, :], np.array([-1.5]))
    b = ellipsoid_exponent(EllipsoidProblem(mu, sigma, [poly])).b
    assert b == pytest.approx((1.5 - a @ mu) ** 2 / (a @ sigma @ a))


def test_inside_and_empty():
    poly = Polyhedron(np.eye(2), np.ones(2))
    sol = ellipsoid_exponent(EllipsoidProblem(np.zeros(2), np.eye(2), [poly]))
    assert sol.inside and sol.b == 0.0
    assert ellipsoid_exponent(EllipsoidProblem(np.zeros(2), np.eye(2), [])).b == np.inf
    # u threshold: {x1 > sqrt(u)} from the origin is u
    half = Polyhedron(np.array([[-1.0, 0.0]]), np.array([-np.sqrt(0.7)]))
    assert ellipsoid_exponent(EllipsoidProblem(np.zeros(2), np.eye(2), [half])).b == pytest.approx(0.7)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_active_set_matches_qp_solver(d, rng):
    for _ in range(15):
        A = rng.standard_normal((d + 2, d))
        x_in = rng.standard_normal(d) * 2 + 3
        c = A @ x_in + rng.uniform(0.1, 1.0, d + 2)
        poly = Polyhedron(A, c)
        M = rng.standard_normal((d, d))
        sigma = M @ M.T + 0.5 * np.eye(d)
        mu = rng.standard_normal(d)
        ours = ellipsoid_exponent(EllipsoidProblem(mu, sigma, [poly])).b
        ref = qp_distance(mu, sigma, poly)
        assert ours == pytest.approx(ref, rel=1e-5, abs=1e-6)


def _eval_pieces(pieces, h):
    for pc in pieces:
        if pc.poly.contains(h, 0.0):
            return pc.E @ h
    raise AssertionError("point not covered")


def test_bivariate_pieces_reproduce_path(rng):
    for rho in (-0.7, -0.2, 0.0, 0.4, 0.8):
        pieces = regions.bivariate_pieces(rho)
        for h in rng.standard_normal((200, 2)) * 2:
            assert np.allclose(_eval_pieces(pieces, h), rank.bivariate_entry_times(*h, rho))


def test_quad_pieces_reproduce_path(rng):
    for rho in (0.5, 0.6, 0.85, -0.55, -0.9):
        pieces = regions.quad_pieces(rho)
        for x in rng.standard_normal((200, 3)) * 2:
            m, d1, d2 = x
            assert np.allclose(_eval_pieces(pieces, x),
                               rank.quad_degenerate_path(m, d1, d2, rho).lambda_entry)


def test_membership_examples(rng):
    assert regions.rejection_region_membership(1.2, 0.3, 0.5, 1.0)
    assert regions.rejection_region_membership(1.2, 0.3, 0.5, 1.0, which="ols")
    assert not regions.rejection_region_membership(0.5, 0.3, 0.5, 1.0)
    with pytest.raises(ValueError):
        regions.rejection_region_membership(1, 1, 1.0, 1)
    # agrees with thresholding the bivariate entry time
    for rho in (-0.6, 0.3):
        for h1, h2 in rng.standard_normal((300, 2)) * 2:
            e1 = rank.bivariate_entry_times(h1, h2, rho)[0]
            assert regions.rejection_region_membership(h1, h2, rho, 0.8) == (e1 > np.sqrt(0.8))
            b1 = (h1 - rho * h2) / (1 - rho ** 2)
            assert regions.rejection_region_membership(h1, h2, rho, 0.8, "ols") == (abs(b1) > np.sqrt(0.8))
