"""Rare/Weak coefficient vectors and Gaussian responses."""
from dataclasses import dataclass

import numpy as np

SIGMA = 1.0


@dataclass(frozen=True)
class SignalConfig:
    theta: float
    r: float
    p: int
    signed: bool = False

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError(f"theta={self.theta} outside (0, 1)")
        if self.r < 0:
            raise ValueError(f"r={self.r} must be nonnegative")

    @property
    def eps(self):
        return self.p ** (-self.theta)

    @property
    def tau(self):
        return np.sqrt(2 * self.r * np.log(self.p))


@dataclass(frozen=True)
class BetaVector:
    beta: np.ndarray
    # kept explicitly so that r = 0 (tau = 0) still records who the signals are
    support: np.ndarray

    @classmethod
    def from_array(cls, beta):
        beta = np.asarray(beta, dtype=float)
        return cls(beta, np.flatnonzero(beta))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_beta(config, seed):
    """i.i.d. draws from the sparse two-point (or signed three-point) mixture."""
    rng = _rng(seed)
    p = config.p
    on = rng.random(p) < config.eps
    beta = np.zeros(p)
    beta[on] = config.tau
    if config.signed:
        flip = rng.random(p) < 0.5
        beta[on & flip] *= -1
    return BetaVector(beta, np.flatnonzero(on))


def draw_response(X, beta, seed, sigma=SIGMA):
    """
    Response y = X beta + sigma z with z standard normal.

    Parameters
    ----------
    X : ndarray or DesignMatrix
    beta : ndarray or BetaVector
    seed : int or Generator
    sigma : float
        Noise level; 0 returns the noiseless mean.
    """
    X = getattr(X, "X", X)
    b = getattr(beta, "beta", beta)
    if X.shape[1] != b.shape[0]:
        raise ValueError(f"design has {X.shape[1]} columns but beta has {b.shape[0]} entries")
    mean = X @ b
    if sigma == 0:
        return mean
    return mean + sigma * _rng(seed).standard_normal(X.shape[0])
