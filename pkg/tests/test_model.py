import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphabridge import (
    BridgeParams,
    DomainError,
    SamplePath,
    TimeGrid,
    covariance,
    limit_variance,
    lil_envelope,
    rescaled_qv,
    transition_moments,
    variance,
)
from oracles import cov_quad, qv_quad, transition_var_quad, var_quad


# -- types -------------------------------------------------------------------


def test_params_validation():
    BridgeParams(-7.5, 0.1, 3.0)
    with pytest.raises(DomainError):
        BridgeParams(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        BridgeParams(1.0, 1.0, -1.0)
    with pytest.raises(DomainError):
        BridgeParams(float("nan"))


@pytest.mark.parametrize("points", [[0.1, 0.2], [0.0, 0.2, 0.2], [0.0, 0.3, 0.1], []])
def test_time_grid_rejects(points):
    with pytest.raises(DomainError):
        TimeGrid(points)


def test_sample_path_invariants():
    grid = TimeGrid([0.0, 0.5])
    SamplePath(grid, [0.0, 1.0], 1.0)
    with pytest.raises(DomainError):
        SamplePath(grid, [0.1, 1.0], 1.0)
    with pytest.raises(DomainError):
        SamplePath(grid, [0.0, math.inf], 1.0)
    with pytest.raises(DomainError):
        SamplePath(grid, [0.0], 1.0)
    with pytest.raises(DomainError):
        SamplePath(grid, [0.0, 1.0], 0.5)


# -- frozen oracle values -----------------------------------------------------

# values computed by the quadrature oracles in tests/oracles.py
BB_COV = 0.125          # cov_quad(1, 1, 0.25, 0.5, 1)
HALF_VAR = math.exp(-1)  # var_quad(0.5, 1 - 1/e, 1)
HALF_QV = 2.0           # qv_quad(0.5, 1 - e^-2, 1)
BB_STEP_VAR = 0.25      # transition_var_quad(1, 1, 0, 0.5, 1)
QUARTER_LIMIT = 2.0     # qv_quad(0.25, 1 - 1e-16, 1) -> 2


def test_frozen_values_match_oracles():
    assert cov_quad(1, 1, 0.25, 0.5, 1) == pytest.approx(BB_COV, rel=1e-12)
    assert var_quad(0.5, 1 - math.exp(-1), 1) == pytest.approx(HALF_VAR, rel=1e-12)
    assert qv_quad(0.5, 1 - math.exp(-2), 1) == pytest.approx(HALF_QV, rel=1e-12)
    assert transition_var_quad(1, 1, 0, 0.5, 1) == pytest.approx(BB_STEP_VAR, rel=1e-12)
    assert qv_quad(0.25, 1 - 1e-12, 1) == pytest.approx(QUARTER_LIMIT, abs=1e-5)


def test_covariance_examples():
    assert covariance(0, 0, 0.3, 0.7, 1) == pytest.approx(0.3, rel=1e-14)
    assert covariance(1, 1, 0.25, 0.5, 1) == pytest.approx(BB_COV, rel=1e-14)
    assert covariance(2, -1, 0, 0.5, 1) == 0.0


def test_variance_examples():
    assert variance(3, 0, 5) == 0.0
    assert variance(0, 0.4, 1) == pytest.approx(0.4, rel=1e-14)
    assert variance(0.5, 1 - math.exp(-1), 1) == pytest.approx(HALF_VAR, rel=1e-13)


def test_rescaled_qv_examples():
    assert rescaled_qv(1, 0, 1) == 0.0
    assert rescaled_qv(0, 0.7, 1) == pytest.approx(0.7, rel=1e-14)
    assert rescaled_qv(0.5, 1 - math.exp(-2), 1) == pytest.approx(HALF_QV, rel=1e-13)


def test_transition_examples():
    p = BridgeParams(2.7, 1.9, 1.0)
    assert transition_moments(p, 0.3, 0.3, 1.7) == (1.7, 0.0)
    mean, var = transition_moments(BridgeParams(0, 1, 1), 0.2, 0.5, 0.4)
    assert mean == pytest.approx(0.4, rel=1e-15)
    assert var == pytest.approx(0.3, rel=1e-13)
    mean, var = transition_moments(BridgeParams(1, 1, 1), 0, 0.5, 0)
    assert mean == 0.0
    assert var == pytest.approx(BB_STEP_VAR, rel=1e-13)


def test_transition_from_origin_is_marginal():
    for alpha in (-1.2, 0.0, 0.5, 1.0, 2.5):
        p = BridgeParams(alpha, 1.7, 2.0)
        _, var = transition_moments(p, 0.0, 1.3, 0.0)
        assert var == pytest.approx(1.7 ** 2 * variance(alpha, 1.3, 2.0), rel=1e-12)


def test_transition_errors():
    p = BridgeParams(1.0)
    with pytest.raises(DomainError):
        transition_moments(p, 0.6, 0.5, 0.0)
    with pytest.raises(DomainError):
        transition_moments(p, 0.1, 1.0, 0.0)


def test_lil_envelope_examples():
    e = math.e
    assert lil_envelope(1, 1 - math.exp(-e), 1) == pytest.approx(math.sqrt(2 * math.exp(-e)), rel=1e-12)
    ee = e ** e
    assert lil_envelope(0.5, 1 - math.exp(-ee), 1) == pytest.approx(
        math.sqrt(2 * math.exp(-ee) * ee), rel=1e-9)
    with pytest.raises(DomainError):
        lil_envelope(0.4, 0.999, 1)


def test_lil_envelope_inner_log_domain():
    # ln ln (1/(T-t)) <= 0 once T - t >= 1/e
    with pytest.raises(DomainError):
        lil_envelope(1, 0.5, 1)
    # the alpha = 1/2 branch needs ln ln ln > 0, i.e. T - t < exp(-e)
    with pytest.raises(DomainError):
        lil_envelope(0.5, 0.9, 1)
    assert lil_envelope(1, 0.9, 1) > 0


def test_limit_variance_examples():
    assert limit_variance(0, 1) == 1.0
    assert limit_variance(0.25, 1) == pytest.approx(QUARTER_LIMIT, rel=1e-15)
    with pytest.raises(DomainError):
        limit_variance(0.5, 1)


@pytest.mark.parametrize("func,args", [
    (covariance, (1, 1, 1.0, 0.5, 1)),
    (covariance, (1, 1, 0.5, 0.5, 0)),
    (variance, (1, 1.2, 1)),
    (rescaled_qv, (1, -0.1, 1)),
])
def test_domain_errors(func, args):
    with pytest.raises(DomainError):
        func(*args)


def test_rescaled_qv_limits():
    # alpha < 1/2 converges to limit_variance, alpha >= 1/2 diverges
    assert rescaled_qv(0.25, 1 - 1e-14, 1) == pytest.approx(limit_variance(0.25, 1), rel=1e-6)
    assert rescaled_qv(0.5, 1 - 1e-12, 1) > 27
    assert rescaled_qv(1.0, 1 - 1e-12, 1) > 1e11


# -- properties ---------------------------------------------------------------


def test_symmetry_random_tuples():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        a, b = rng.uniform(-3, 3, 2)
        T = rng.uniform(0.2, 5)
        s, t = rng.uniform(0, 0.999 * T, 2)
        lhs = covariance(a, b, s, t, T)
        rhs = covariance(b, a, t, s, T)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1e-300)


def test_variance_equals_covariance_diagonal():
    alphas = [-2, -0.5, 0, 0.25, 0.5, 0.5 + 1e-6, 0.5 - 1e-6, 0.5 + 1e-9, 0.5 - 1e-9, 1, 3]
    for alpha in alphas:
        for t in np.linspace(0, 0.99, 23):
            v = variance(alpha, t, 1.0)
            assert abs(v - covariance(alpha, alpha, t, t, 1.0)) <= 1e-12 * (1 + abs(v))


def test_branch_continuity():
    for s, t, T in [(0.3, 0.7, 1.0), (0.9, 0.2, 2.0), (0.999, 0.999, 1.0)]:
        for alpha in (0.5, -1.0, 2.0):
            ref = covariance(alpha, 1 - alpha, s, t, T)
            for d in (1e-9, -1e-9):
                assert abs(covariance(alpha, 1 - alpha + d, s, t, T) - ref) <= 1e-6 * abs(ref)
    for t in (0.1, 0.5, 0.999):
        ref = variance(0.5, t, 1.0)
        for d in (1e-9, -1e-9):
            assert abs(variance(0.5 + d, t, 1.0) - ref) <= 1e-6 * abs(ref)


def test_branch_matches_log_form_exactly_at_switch():
    # logarithmic branches of the lemma
    s, t, T = 0.3, 0.6, 1.5
    expect = (T - s) ** 0.2 * (T - t) ** 0.8 * math.log(T / (T - s))
    assert covariance(0.2, 0.8, s, t, T) == pytest.approx(expect, rel=1e-14)
    assert variance(0.5, t, T) == pytest.approx((T - t) * (math.log(T) - math.log(T - t)), rel=1e-14)
    assert rescaled_qv(0.5, t, T) == pytest.approx(-math.log(1 - t / T), rel=1e-14)


def test_quadrature_oracle_agreement():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        a, b = rng.uniform(-3, 3, 2)
        T = rng.uniform(0.5, 3.0)
        s, t = np.sort(rng.uniform(0.01, 0.95 * T, 2))
        sigma = rng.uniform(0.2, 3.0)
        assert covariance(a, b, s, t, T) == pytest.approx(cov_quad(a, b, s, t, T), rel=1e-9)
        assert variance(a, t, T) == pytest.approx(var_quad(a, t, T), rel=1e-9)
        assert rescaled_qv(a, t, T) == pytest.approx(qv_quad(a, t, T), rel=1e-9)
        _, var = transition_moments(BridgeParams(a, sigma, T), s, t, 0.0)
        assert var == pytest.approx(transition_var_quad(a, sigma, s, t, T), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    alpha=st.floats(-3, 3),
    pts=st.lists(st.floats(0.0, 0.995), min_size=10, max_size=10, unique=True),
)
def test_covariance_matrix_psd(alpha, pts):
    t = np.sort(np.asarray(pts))
    C = covariance(alpha, alpha, t[:, None], t[None, :], 1.0)
    assert np.allclose(C, C.T, rtol=1e-12, atol=0)
    # congruence with D^-1/2 keeps the sign of eigenvalues and bounds entries by 1,
    # so the absolute tolerance is meaningful even when variances reach 1e10
    d = np.sqrt(np.diag(C))
    keep = d > 0
    R = C[np.ix_(keep, keep)] / np.outer(d[keep], d[keep])
    assert np.linalg.eigvalsh(0.5 * (R + R.T)).min() >= -1e-10


@settings(max_examples=200, deadline=None)
@given(alpha=st.floats(-3, 3), t1=st.floats(0, 0.9999), t2=st.floats(0, 0.9999))
def test_rescaled_qv_monotone(alpha, t1, t2):
    lo, hi = sorted((t1, t2))
    assert rescaled_qv(alpha, lo, 1.0) <= rescaled_qv(alpha, hi, 1.0)


@settings(max_examples=200, deadline=None)
@given(alpha=st.floats(-3, 3), t=st.floats(0, 0.9999))
def test_variance_nonnegative(alpha, t):
    assert variance(alpha, t, 1.0) >= 0.0


def test_vectorized_times():
    t = np.array([0.0, 0.25, 0.5])
    np.testing.assert_allclose(variance(1.0, t, 1.0), t * (1 - t), rtol=1e-14, atol=0)
