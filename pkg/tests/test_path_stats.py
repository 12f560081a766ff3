import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from alphabridge import (
    BridgeParams,
    DomainError,
    SamplePath,
    TimeGrid,
    WindowSpec,
    envelope_ratio,
    geometric_grid,
    lil_envelope,
    limit_variance,
    rescaled_terminal,
    sign_split,
    terminal_sup,
    variance,
)
from alphabridge.samplers import sample_exact_many


def _path(t, x, T=1.0):
    return SamplePath(TimeGrid(t), x, T)


def test_terminal_sup_examples():
    zero = _path([0.0, 0.5, 0.9], [0.0, 0.0, 0.0])
    assert terminal_sup(zero, WindowSpec(0.1, 0.95)) == 0.0
    p = _path([0.0, 0.5, 0.6, 0.7], [0.0, -3.0, 2.0, 0.5])
    assert terminal_sup(p, WindowSpec(0.4, 0.65)) == 3.0


def test_terminal_sup_errors():
    p = _path([0.0, 0.5, 0.9], [0.0, 1.0, 2.0])
    with pytest.raises(DomainError):
        terminal_sup(p, WindowSpec(0.6, 0.8))
    with pytest.raises(DomainError):
        terminal_sup(p, WindowSpec(0.6, 1.0))
    with pytest.raises(DomainError):
        WindowSpec(0.5, 0.5)


def test_terminal_sup_monotone_in_window():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 0.99, 200)
    x = np.r_[0, rng.standard_normal(199)]
    p = _path(t, x)
    assert terminal_sup(p, WindowSpec(0.5, 0.6)) <= terminal_sup(p, WindowSpec(0.4, 0.6)) \
        <= terminal_sup(p, WindowSpec(0.4, 0.9))


def test_terminal_sup_bridge_vanishes():
    # sd at t = 1 - 1e-4 is sqrt(variance) ~ 0.01
    assert math.sqrt(variance(1.0, 1 - 1e-4, 1.0)) == pytest.approx(0.01, rel=1e-3)
    g = geometric_grid(1.0, 1 - 1e-5, 0.7)
    g = TimeGrid(np.union1d(g.points, [1 - 1e-4]))
    X = sample_exact_many(BridgeParams(1.0), g, 5, range(1000))
    window = WindowSpec(1 - 1e-4, 1 - 1e-5)
    sups = [terminal_sup(SamplePath(g, x, 1.0), window) for x in X]
    assert np.quantile(sups, 0.99) <= 0.06


def test_envelope_ratio_examples():
    t = 1 - np.logspace(-2, -6, 30)
    t = np.r_[0, t]
    zero = _path(t, np.zeros(t.size))
    w = WindowSpec(1 - 1e-2, 1 - 1e-6)
    assert envelope_ratio(zero, 1.0, w) == (0.0, 0.0)
    env = np.r_[0.0, lil_envelope(1.0, t[1:], 1.0)]
    assert envelope_ratio(_path(t, env), 1.0, w) == pytest.approx((1.0, 1.0), rel=1e-15)


def test_envelope_ratio_sign_symmetry():
    rng = np.random.default_rng(1)
    t = np.r_[0, 1 - np.logspace(-2, -6, 50)]
    x = np.r_[0, rng.standard_normal(50) * 1e-3]
    w = WindowSpec(1 - 1e-2, 1 - 1e-6)
    hi, lo = envelope_ratio(_path(t, x), 1.5, w)
    nhi, nlo = envelope_ratio(_path(t, -x), 1.5, w)
    assert (nhi, nlo) == (-lo, -hi)


def test_envelope_ratio_domain():
    t = np.r_[0, 0.5, 0.6]
    with pytest.raises(DomainError):
        envelope_ratio(_path(t, [0, 1, 1]), 1.0, WindowSpec(0.4, 0.7))
    with pytest.raises(DomainError):
        envelope_ratio(_path(t, [0, 1, 1]), 0.3, WindowSpec(0.4, 0.7))


def test_envelope_ratio_bridge_soft_band():
    g = geometric_grid(1.0, 1 - 1e-6, 0.99)
    X = sample_exact_many(BridgeParams(1.0), g, 12, range(500))
    w = WindowSpec(1 - 1e-2, 1 - 1e-6)
    sups = [envelope_ratio(SamplePath(g, x, 1.0), 1.0, w)[0] for x in X]
    assert 0.5 <= np.median(sups) <= 1.3


def test_rescaled_terminal_examples():
    t = [0.0, 0.3, 0.75]
    assert rescaled_terminal(_path(t, [0, 0, 0]), 0.7) == 0.0
    assert rescaled_terminal(_path(t, [0, 1.0, -2.5]), 0.0) == -2.5
    assert rescaled_terminal(_path(t, [0, 1.0, -2.5]), 1.0) == pytest.approx(-10.0, rel=1e-15)


def test_rescaled_terminal_linear():
    p = _path([0.0, 0.3, 0.99], [0, 1.0, 0.37])
    for c in (-3.0, 0.5, 2.0):
        assert rescaled_terminal(p.scaled(c), 0.25) == pytest.approx(c * rescaled_terminal(p, 0.25),
                                                                     rel=1e-15)


def test_rescaled_terminal_limit_law():
    assert limit_variance(0.25, 1.0) == 2.0
    g = TimeGrid([0.0, 0.5, 1 - 1e-6])
    X = sample_exact_many(BridgeParams(0.25), g, 33, range(5000))
    vals = [rescaled_terminal(SamplePath(g, x, 1.0), 0.25) for x in X]
    ks = stats.kstest(vals, "norm", args=(0.0, math.sqrt(2.0))).statistic
    assert ks <= 0.03


def test_sign_split_examples():
    plus, minus, small = sign_split([5, -5, 0.1], 1)
    assert (plus, minus) == (1 / 3, 1 / 3)
    assert small == pytest.approx(1 / 3, rel=1e-15)
    assert sign_split([0.0, 0.0], 1.0) == (0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        sign_split([], 1.0)
    with pytest.raises(DomainError):
        sign_split([1.0], 0.0)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=60), st.floats(0.01, 50))
def test_sign_split_sums_to_one(values, threshold):
    fracs = sign_split(values, threshold)
    assert all(0.0 <= f <= 1.0 for f in fracs)
    assert fracs[0] + fracs[1] + fracs[2] == 1.0


def test_sign_split_divergent_regime_frac_plus():
    # alpha = -0.5: X_t sd ~ 70.7 at t = 1 - 1e-4, the sign is a fair coin
    g = TimeGrid([0.0, 0.5, 1 - 1e-4])
    X = sample_exact_many(BridgeParams(-0.5), g, 44, range(1000))[:, -1]
    plus, minus, small = sign_split(X, 10.0)
    # conditional on |X| >= 10 the sign is symmetric
    n_big = round((plus + minus) * X.size)
    assert abs(plus / (plus + minus) - 0.5) <= 4 * math.sqrt(0.25 / n_big)
    # frac_small is ~ 2 Phi(10 / 70.7) - 1 ~ 0.11, not <= 0.01
    expected_small = 2 * stats.norm.cdf(10 / math.sqrt(variance(-0.5, 1 - 1e-4, 1.0))) - 1
    se = math.sqrt(expected_small * (1 - expected_small) / 1000)
    assert abs(small - expected_small) <= 4 * se


@pytest.mark.xfail(strict=True, reason="P(|X| < 10) ~ 0.11 at t = 1 - 1e-4 for alpha = -0.5")
def test_sign_split_divergent_regime_frac_small():
    g = TimeGrid([0.0, 0.5, 1 - 1e-4])
    X = sample_exact_many(BridgeParams(-0.5), g, 44, range(1000))[:, -1]
    assert sign_split(X, 10.0)[2] <= 0.01
