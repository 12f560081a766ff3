"""Finite-sample path diagnostics for the behavior of X_t as t approaches T."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import SamplePath, lil_envelope

__all__ = [
    "WindowSpec",
    "terminal_sup",
    "envelope_ratio",
    "rescaled_terminal",
    "sign_split",
]


@dataclass(frozen=True)
class WindowSpec:
    """Closed observation window ``[t_lo, t_hi]`` inside ``[0, T)``."""

    t_lo: float
    t_hi: float

    def __post_init__(self):
        if not 0 <= self.t_lo < self.t_hi:
            raise DomainError(
                f"window requires 0 <= t_lo < t_hi, got [{self.t_lo!r}, {self.t_hi!r}]")

    def mask(self, path: SamplePath) -> np.ndarray:
        if self.t_hi >= path.horizon_T:
            raise DomainError(f"window end {self.t_hi!r} is not below T={path.horizon_T!r}")
        sel = (path.t >= self.t_lo) & (path.t <= self.t_hi)
        if not sel.any():
            raise DomainError(
                f"window [{self.t_lo!r}, {self.t_hi!r}] contains no grid point")
        return sel


def terminal_sup(path: SamplePath, window: WindowSpec) -> float:
    """Largest ``|x(t)|`` over the grid points inside ``window``."""
    return float(np.max(np.abs(path.x[window.mask(path)])))


def envelope_ratio(path: SamplePath, alpha: float, window: WindowSpec):
    """Max and min over the window of ``x(t) / lil_envelope(alpha, t, T)``.

    Returns
    -------
    (sup_ratio, inf_ratio)
    """
    sel = window.mask(path)
    ratio = path.x[sel] / lil_envelope(alpha, path.t[sel], path.horizon_T)
    return float(np.max(ratio)), float(np.min(ratio))


def rescaled_terminal(path: SamplePath, alpha: float) -> float:
    """``x(t_last) / (T - t_last)**alpha``, the rescaled martingale at the last point."""
    t_last = path.t[-1]
    return float(path.x[-1] * (path.horizon_T - t_last) ** (-float(alpha)))


def sign_split(values, threshold: float):
    """Fractions of values above ``threshold``, below ``-threshold``, and in between.

    Returns
    -------
    (frac_plus, frac_minus, frac_small)
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DomainError("sign_split needs at least one value")
    if not threshold > 0:
        raise DomainError(f"threshold must be > 0, got {threshold!r}")
    n_plus = int(np.count_nonzero(v > threshold))
    n_minus = int(np.count_nonzero(v < -threshold))
    n_small = v.size - n_plus - n_minus
    # the last nonzero fraction is taken as the remainder so the three sum to exactly 1
    frac_plus, frac_minus = n_plus / v.size, n_minus / v.size
    if n_small == 0:
        return frac_plus, 1.0 - frac_plus, 0.0
    return frac_plus, frac_minus, 1.0 - (frac_plus + frac_minus)
