import numpy as np
import pytest

from fdrlab.signal import BetaVector, SignalConfig, draw_beta, draw_response


def test_tau_and_eps():
    c = SignalConfig(0.5, 2.0, 10000)
    assert c.eps == pytest.approx(0.01)
    assert c.tau == pytest.approx(np.sqrt(4 * np.log(10000)))


def test_draw_beta_two_point():
    c = SignalConfig(0.3, 1.5, 5000)
    b = draw_beta(c, 1)
    vals = np.unique(b.beta)
    assert set(np.round(vals, 12)) <= {0.0, round(c.tau, 12)}
    # binomial mean p^{1-theta} ~ 388, sd ~ 19
    assert abs(b.support.size - 5000 ** 0.7) < 100


def test_draw_beta_signed_and_r0_support():
    c = SignalConfig(0.2, 0.0, 2000, signed=True)
    b = draw_beta(c, 4)
    assert np.all(b.beta == 0)
    assert b.support.size > 0
    s = draw_beta(SignalConfig(0.2, 2.0, 2000, signed=True), 4)
    pos = np.sum(s.beta > 0)
    neg = np.sum(s.beta < 0)
    assert pos > 0 and neg > 0
    assert abs(pos - neg) < 4 * np.sqrt(pos + neg)


def test_draw_response_mean_and_shape():
    X = np.eye(4)
    b = BetaVector.from_array([1.0, 0, 0, 2.0])
    assert np.array_equal(draw_response(X, b, 0, sigma=0), [1.0, 0, 0, 2.0])
    with pytest.raises(ValueError):
        draw_response(np.eye(3), b, 0)


def test_signal_config_validation():
    with pytest.raises(ValueError):
        SignalConfig(1.0, 1.0, 10)
    with pytest.raises(ValueError):
        SignalConfig(0.5, -1.0, 10)
