"""
Closed-form quantities of the alpha-Wiener bridge.

The alpha-Wiener bridge with diffusion scale ``sigma`` solves

    dX_t = -alpha * X_t / (T - t) dt + sigma dB_t,   X_0 = 0,   t in [0, T),

and has the explicit representation

    X_t = sigma * int_0^t ((T - t) / (T - s))**alpha dB_s.

Everything here is a pure function of scalars (or broadcastable arrays of
times). Formulas with a removable singularity (``alpha + beta = 1`` for the
covariance, ``alpha = 1/2`` for the variance and the quadratic variation of
the rescaled martingale ``X_t / (T - t)**alpha``) are evaluated through
``expm1(c * L) / c`` which tends to ``L`` as ``c -> 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError

__all__ = [
    "BridgeParams",
    "TimeGrid",
    "SamplePath",
    "covariance",
    "variance",
    "rescaled_qv",
    "transition_moments",
    "lil_envelope",
    "limit_variance",
]

# |c| below this switches expm1(c L)/c to its limit L
BRANCH_TOL = 1e-10


@dataclass(frozen=True)
class BridgeParams:
    """Model triple defining one alpha-Wiener bridge law.

    Parameters
    ----------
    alpha : float
        Drift exponent, any real.
    sigma : float
        Diffusion scale, > 0.
    horizon_T : float
        Terminal time, > 0.
    """

    alpha: float
    sigma: float = 1.0
    horizon_T: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "sigma", "horizon_T"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma!r}")
        if self.horizon_T <= 0:
            raise DomainError(f"horizon_T must be > 0, got {self.horizon_T!r}")


def _readonly(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing observation times starting at 0."""

    points: np.ndarray

    def __post_init__(self):
        pts = _readonly(np.atleast_1d(self.points))
        if pts.ndim != 1 or pts.size == 0:
            raise DomainError("time grid must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(pts)):
            raise DomainError("time grid contains non-finite points")
        if pts[0] != 0.0:
            raise DomainError(f"time grid must start at 0, got {pts[0]!r}")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            idx = int(np.argmin(np.diff(pts) > 0)) + 1
            raise DomainError(f"time grid not strictly increasing at index {idx}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    @property
    def last(self) -> float:
        return float(self.points[-1])

    def check_within(self, horizon_T: float) -> None:
        """Raise DomainError unless every point lies strictly before ``horizon_T``."""
        if self.last >= horizon_T:
            raise DomainError(
                f"grid point {self.last!r} is not strictly below horizon T={horizon_T!r}"
            )


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One discretized realization: grid times and state values.

    ``params`` records the law the path was sampled from; it is ``None`` for
    paths read from disk, in which case ``horizon_T`` must be supplied.
    """

    grid: TimeGrid
    values: np.ndarray
    horizon_T: float = field(default=None)
    params: BridgeParams | None = None

    def __post_init__(self):
        vals = _readonly(np.atleast_1d(self.values))
        if vals.shape != self.grid.points.shape:
            raise DomainError(
                f"values length {vals.size} does not match grid length {len(self.grid)}"
            )
        if vals[0] != 0.0:
            raise DomainError(f"path must start at 0, got {vals[0]!r}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("path contains non-finite values")
        horizon = self.horizon_T
        if horizon is None:
            if self.params is None:
                raise DomainError("either horizon_T or params is required")
            horizon = self.params.horizon_T
        horizon = float(horizon)
        if self.params is not None and horizon != self.params.horizon_T:
            raise DomainError("horizon_T disagrees with params.horizon_T")
        if not horizon > 0:
            raise DomainError(f"horizon_T must be > 0, got {horizon!r}")
        self.grid.check_within(horizon)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "horizon_T", horizon)

    @classmethod
    def from_arrays(cls, t, x, horizon_T, params=None):
        return cls(TimeGrid(np.asarray(t, dtype=float)), np.asarray(x, dtype=float),
                   horizon_T, params)

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    @property
    def x(self) -> np.ndarray:
        return self.values

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, SamplePath):
            return NotImplemented
        return (self.grid == other.grid and np.array_equal(self.values, other.values)
                and self.horizon_T == other.horizon_T)

    def scaled(self, factor: float) -> SamplePath:
        """Return the path with values multiplied by ``factor`` (provenance dropped)."""
        return SamplePath(self.grid, factor * self.values, self.horizon_T)


def _scalar_or_array(value):
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def _check_horizon(T):
    T = float(T)
    if not T > 0 or not math.isfinite(T):
        raise DomainError(f"horizon T must be finite and > 0, got {T!r}")
    return T


def _check_times(T, **times):
    out = []
    for name, value in times.items():
        arr = np.asarray(value, dtype=float)
        if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr >= T):
            raise DomainError(f"{name} must satisfy 0 <= {name} < T={T!r}")
        out.append(arr)
    return out


def _expm1_ratio(c, L):
    """``expm1(c * L) / c`` with its limit ``L`` at ``c = 0``."""
    if abs(c) < BRANCH_TOL:
        return L * (1.0 + 0.5 * c * L)
    return np.expm1(c * L) / c


def covariance(alpha, beta, s, t, T):
    """Covariance of ``X_s`` (drift exponent ``alpha``) and ``X_t`` (exponent ``beta``).

    Both processes are driven by the same Wiener process and ``sigma = 1``.
    For ``alpha + beta != 1``

        (T-s)^alpha (T-t)^beta / (1-alpha-beta) * (T^(1-alpha-beta) - (T - s^t)^(1-alpha-beta))

    and the logarithmic limit ``(T-s)^alpha (T-t)^beta ln(T / (T - s^t))``
    otherwise, where ``s^t = min(s, t)``.
    """
    T = _check_horizon(T)
    s, t = _check_times(T, s=s, t=t)
    alpha, beta = float(alpha), float(beta)
    c = 1.0 - alpha - beta
    m = np.minimum(s, t)
    # L = ln((T - m) / T) <= 0
    L = np.log1p(-m / T)
    prefactor = np.exp(alpha * np.log(T - s) + beta * np.log(T - t) + c * math.log(T))
    return _scalar_or_array(-prefactor * _expm1_ratio(c, L))


def variance(alpha, t, T):
    """Variance of ``X_t`` for ``sigma = 1``.

    ``T/(1-2a) ((T-t)/T)^(2a) - (T-t)/(1-2a)`` for ``a != 1/2`` and
    ``(T-t) ln(T/(T-t))`` at ``a = 1/2``.
    """
    T = _check_horizon(T)
    (t,) = _check_times(T, t=t)
    c = 1.0 - 2.0 * float(alpha)
    return _scalar_or_array((T - t) * _expm1_ratio(c, -np.log1p(-t / T)))


def rescaled_qv(alpha, t, T):
    """Quadratic variation ``int_0^t (T-s)^(-2 alpha) ds`` of ``X_t / (T-t)^alpha``."""
    T = _check_horizon(T)
    (t,) = _check_times(T, t=t)
    c = 1.0 - 2.0 * float(alpha)
    return _scalar_or_array(-(T ** c) * _expm1_ratio(c, np.log1p(-t / T)))


def _transition_coeffs(alpha, T, s, t):
    """Mean factor and unit-sigma variance of ``X_t`` given ``X_s``.

    Vectorized over ``s`` and ``t``; no domain checks.
    """
    c = 1.0 - 2.0 * alpha
    # ln((T - s) / (T - t)) >= 0
    L = np.log1p((t - s) / (T - t))
    factor = np.exp(-alpha * L)
    var = (T - t) * _expm1_ratio(c, L)
    return factor, np.maximum(var, 0.0)


def transition_moments(params: BridgeParams, s, t, x_s):
    """Conditional mean and variance of ``X_t`` given ``X_s = x_s``.

    mean = ((T-t)/(T-s))^alpha * x_s and
    variance = sigma^2 (T-t)^(2 alpha) (<M>_t - <M>_s).

    Returns
    -------
    (mean, variance)
    """
    T = params.horizon_T
    s_arr, t_arr = _check_times(T, s=s, t=t)
    if np.any(s_arr > t_arr):
        raise DomainError("transition requires s <= t")
    factor, var = _transition_coeffs(params.alpha, T, s_arr, t_arr)
    mean = factor * np.asarray(x_s, dtype=float)
    return _scalar_or_array(mean), _scalar_or_array(params.sigma ** 2 * var)


def lil_envelope(alpha, t, T):
    """Law-of-the-iterated-logarithm envelope of ``X_t`` as ``t -> T``.

    For ``alpha > 1/2``: ``sqrt(2 (T-t) / (2 alpha - 1) * ln ln(1/(T-t)))``.
    For ``alpha = 1/2``: ``sqrt(2 (T-t) ln(1/(T-t)) ln ln ln(1/(T-t)))``.
    Every iterated logarithm must be strictly positive at ``t``.
    """
    alpha = float(alpha)
    if alpha < 0.5:
        raise DomainError(f"LIL envelope requires alpha >= 1/2, got {alpha!r}")
    T = _check_horizon(T)
    (t,) = _check_times(T, t=t)
    gap = T - t
    log1 = -np.log(gap)
    with np.errstate(invalid="ignore", divide="ignore"):
        log2 = np.log(log1)
        if alpha == 0.5:
            log3 = np.log(log2)
            inner = log3
            value = 2.0 * gap * log1 * log3
        else:
            inner = log2
            value = 2.0 * gap / (2.0 * alpha - 1.0) * log2
    if np.any(~(log1 > 0)) or np.any(~(inner > 0)):
        raise DomainError(
            "iterated logarithm not positive: T - t too large for the LIL envelope"
        )
    return _scalar_or_array(np.sqrt(value))


def limit_variance(alpha, T):
    """Variance ``T^(1-2 alpha) / (1-2 alpha)`` of the terminal value of ``X_t/(T-t)^alpha``.

    Defined for ``alpha < 1/2`` only; the quadratic variation diverges otherwise.
    """
    alpha = float(alpha)
    if alpha >= 0.5:
        raise DomainError(f"limit variance requires alpha < 1/2, got {alpha!r}")
    T = _check_horizon(T)
    c = 1.0 - 2.0 * alpha
    return T ** c / c
