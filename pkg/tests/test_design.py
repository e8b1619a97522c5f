import numpy as np
import pytest

from fdrlab.design import (DesignError, DesignSpec, block2_neighbor, design_from_spec,
                           make_gram, min_eigenvalue, realize_design)


@pytest.mark.parametrize("kind,extra", [
    ("orthogonal", {}), ("block2", {"rho": 0.5}), ("block_d", {"rho": 0.4, "d": 4}),
    ("factor", {}), ("expdecay", {"rho": 0.6}), ("wishart", {}),
])
def test_gram_unit_diagonal_and_pd(kind, extra):
    G = make_gram(DesignSpec(kind, 40, 120, **extra))
    assert np.allclose(np.diag(G), 1.0)
    assert np.allclose(G, G.T)
    assert min_eigenvalue(G) > 0


def test_block2_entries():
    G = make_gram(DesignSpec("block2", 6, 12, rho=-0.3))
    expect = np.kron(np.eye(3), np.array([[1, -0.3], [-0.3, 1]]))
    assert np.array_equal(G, expect)
    # eigenvalues 1 +- rho
    assert min_eigenvalue(G) == pytest.approx(0.7)


def test_block_d_and_expdecay_entries():
    G = make_gram(DesignSpec("block_d", 10, 20, rho=0.3, d=5))
    assert G[0, 4] == 0.3 and G[4, 5] == 0.0 and G[5, 9] == 0.3
    E = make_gram(DesignSpec("expdecay", 5, 10, rho=0.6))
    assert E[0, 3] == pytest.approx(0.6 ** 3)
    assert E[4, 1] == pytest.approx(0.6 ** 3)


def test_factor_gram_is_half_rank_two_plus_identity():
    G = make_gram(DesignSpec("factor", 30, 60, seed=5))
    # (BB' + I)/2 with unit-norm rows of B: eigenvalue 1/2 has multiplicity p-2
    w = np.linalg.eigvalsh(G)
    assert np.allclose(w[:-2], 0.5)
    assert w[-2:].sum() == pytest.approx(30 - 0.5 * 28)


def test_realize_design_matches_gram():
    G = make_gram(DesignSpec("expdecay", 50, 100, rho=0.7))
    D = realize_design(G, 100, seed=3)
    assert np.abs(D.X.T @ D.X - G).max() < 1e-8
    assert np.allclose(np.linalg.norm(D.X, axis=0), 1.0)
    assert D.n == 100 and D.p == 50


def test_realize_is_seeded():
    s = DesignSpec("block2", 10, 30, rho=0.5, seed=9)
    assert np.array_equal(design_from_spec(s).X, design_from_spec(s).X)


@pytest.mark.parametrize("kw", [
    {"kind": "nope", "p": 4, "n": 8}, {"kind": "block2", "p": 4, "n": 3},
    {"kind": "block2", "p": 4, "n": 8, "rho": 1.0}, {"kind": "block_d", "p": 10, "n": 20, "d": 3},
])
def test_invalid_specs(kw):
    with pytest.raises(DesignError):
        DesignSpec(**kw)


def test_block2_neighbor():
    assert list(block2_neighbor(5)) == [1, 0, 3, 2, 4]
