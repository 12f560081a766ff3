"""
Inference for the drift exponent and the diffusion scale from one observed path.

The maximum likelihood estimator of ``alpha`` observed on ``[0, t]`` is

    alpha_hat_t = - int_0^t x/(T-s) dx / int_0^t x^2/(T-s)^2 ds.

The stochastic integral in the numerator is never summed directly. Ito's
formula applied to ``x^2 / (T - s)`` gives

    int_0^t x/(T-s) dx = 1/2 (x_t^2/(T-t) - energy_t - sigma^2 ln(T/(T-t))),

so only the time integral ``energy_t`` needs a quadrature (trapezoidal on the
observed grid). ``sigma^2`` defaults to 1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
import json
import math

import numpy as np

from .errors import DegenerateEstimateError, DegeneratePathError, DomainError
from .model import SamplePath

__all__ = [
    "EstimateReport",
    "energy_integral",
    "trapezoid_energy",
    "stoch_integral_closed_form",
    "mle_alpha",
    "log_likelihood_ratio",
    "qv_sigma2",
    "hellinger_half",
    "classify_alpha",
    "nearest_candidate",
    "estimate",
    "format_float",
]

ZERO_ENERGY = 1e-300


def format_float(value: float) -> str:
    """Round-trip-safe decimal with 17 significant digits."""
    return format(float(value), ".17g")


def _restrict(path: SamplePath, t):
    """Grid times and values on ``[0, t]``, with ``x(t)`` interpolated if needed."""
    s, x = path.t, path.x
    if t is None:
        return s, x
    t = float(t)
    if not 0.0 <= t <= s[-1]:
        raise DomainError(
            f"observation time t={t!r} outside the observed range [0, {s[-1]!r}]")
    k = int(np.searchsorted(s, t, side="right"))
    if s[k - 1] == t:
        return s[:k], x[:k]
    x_t = np.interp(t, s, x)
    return np.append(s[:k], t), np.append(x[:k], x_t)


def trapezoid_energy(s, x, T) -> float:
    """Trapezoid of ``x^2 / (T - s)^2`` over raw arrays.

    Array-level kernel of :func:`energy_integral`; accepts synthetic curves
    that need not start at 0.
    """
    s, x = np.asarray(s, dtype=float), np.asarray(x, dtype=float)
    if s.size < 2:
        return 0.0
    g = (x / (T - s)) ** 2
    return float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(s)))


def energy_integral(path: SamplePath, t=None) -> float:
    """Trapezoidal ``int_0^t x(s)^2 / (T - s)^2 ds`` on the observed grid.

    ``t`` defaults to the last grid point.
    """
    s, x = _restrict(path, t)
    return trapezoid_energy(s, x, path.horizon_T)


def _stoch(s, x, T, energy, sigma2):
    t, x_t = s[-1], x[-1]
    return 0.5 * (x_t ** 2 / (T - t) - energy - sigma2 * math.log1p(t / (T - t)))


def stoch_integral_closed_form(path: SamplePath, t=None, sigma2: float = 1.0) -> float:
    """``int_0^t x/(T-s) dx`` through Ito's formula (see module docstring)."""
    s, x = _restrict(path, t)
    T = path.horizon_T
    if s[-1] >= T:
        raise DomainError(f"observation time must be < T={T!r}")
    return _stoch(s, x, T, trapezoid_energy(s, x, T), sigma2)


def _mle(s, x, T, sigma2):
    energy = trapezoid_energy(s, x, T)
    if energy < ZERO_ENERGY:
        raise DegenerateEstimateError(
            f"zero energy on [0, {s[-1]!r}]: the MLE of alpha is undefined")
    stoch = _stoch(s, x, T, energy, sigma2)
    return -stoch / energy, energy, stoch


def mle_alpha(path: SamplePath, t=None, sigma2: float = 1.0) -> float:
    """Maximum likelihood estimate of ``alpha`` from the path observed on ``[0, t]``.

    Raises
    ------
    DegenerateEstimateError
        If the energy integral vanishes (e.g. ``t = 0`` or a zero path).
    """
    s, x = _restrict(path, t)
    return _mle(s, x, path.horizon_T, sigma2)[0]


def log_likelihood_ratio(path: SamplePath, alpha: float, t=None, sigma2: float = 1.0) -> float:
    """Log density of the alpha-bridge law against the Wiener law on ``[0, t]``.

    Equal to ``(-alpha * I - alpha^2 / 2 * energy) / sigma^2`` where ``I`` is the
    stochastic integral; quadratic in ``alpha`` with its maximum at the MLE.
    """
    s, x = _restrict(path, t)
    T = path.horizon_T
    energy = trapezoid_energy(s, x, T)
    stoch = _stoch(s, x, T, energy, sigma2)
    return (-alpha * stoch - 0.5 * alpha ** 2 * energy) / sigma2


def qv_sigma2(path: SamplePath) -> float:
    """Realized quadratic variation over the observed span, ``sum(dx^2) / (t_n - t_0)``."""
    if len(path) < 2:
        raise DegeneratePathError("quadratic variation needs at least 2 points")
    dx = np.diff(path.x)
    return float(np.dot(dx, dx) / (path.t[-1] - path.t[0]))


def hellinger_half(path: SamplePath, alpha: float, beta: float, t=None) -> float:
    """Hellinger process of order 1/2 between the alpha- and beta-bridge laws."""
    return (alpha - beta) ** 2 / 8.0 * energy_integral(path, t)


def classify_alpha(path: SamplePath, t, candidates, sigma2: float = 1.0) -> float:
    """Candidate drift exponent nearest to the MLE; ties go to the smaller candidate."""
    cands = sorted(float(c) for c in candidates)
    if not cands:
        raise DomainError("candidates must be nonempty")
    return nearest_candidate(mle_alpha(path, t, sigma2), cands)


def nearest_candidate(alpha_hat: float, candidates) -> float:
    cands = np.sort(np.asarray(candidates, dtype=float))
    return float(cands[int(np.argmin(np.abs(cands - alpha_hat)))])


@dataclass(frozen=True)
class EstimateReport:
    alpha_hat: float
    sigma2_hat: float
    energy: float
    stoch_integral: float
    horizon_t: float
    n_points: int

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        body = ", ".join(
            f"{json.dumps(k)}: {v if isinstance(v, int) else format_float(v)}"
            for k, v in self.to_dict().items())
        return "{" + body + "}"


def estimate(path: SamplePath, t=None, sigma2: float | None = None) -> EstimateReport:
    """Full report for the path observed on ``[0, t]``.

    ``sigma2`` enters only the Ito correction of the MLE and defaults to 1.
    """
    s, x = _restrict(path, t)
    T = path.horizon_T
    if s.size < 2:
        raise DegeneratePathError("estimation needs at least 2 observed points")
    sub = SamplePath.from_arrays(s, x, T)
    sigma2_hat = qv_sigma2(sub)
    alpha_hat, energy, stoch = _mle(s, x, T, 1.0 if sigma2 is None else sigma2)
    return EstimateReport(alpha_hat=alpha_hat, sigma2_hat=sigma2_hat, energy=energy,
                          stoch_integral=stoch, horizon_t=float(s[-1]), n_points=int(s.size))
