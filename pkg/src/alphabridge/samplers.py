"""
Samplers for the alpha-Wiener bridge on a time grid.

Three methods share one seeding contract:

- ``sample_exact``: sequential Markov recursion with the exact Gaussian
  transition law. O(n), exact in distribution arbitrarily close to T.
- ``sample_joint``: one multivariate normal draw from the covariance matrix.
- ``sample_euler``: explicit Euler-Maruyama.

Each replicate owns a Philox (counter-based) stream keyed by
``(root_seed, replicate_index)``. A replicate's path therefore does not depend
on which other replicates are drawn, in which order, or on how many threads
are used. All three methods consume the same ``n - 1`` standard normals per
path, and paths are computed for ``sigma = 1`` and scaled afterwards, so
``sigma * path(sigma=1) == path(sigma)`` holds bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, NumericalError, StepSizeError
from .model import BridgeParams, SamplePath, TimeGrid, _transition_coeffs, covariance

__all__ = [
    "SeedSpec",
    "uniform_grid",
    "geometric_grid",
    "merge_grids",
    "sample_exact",
    "sample_joint",
    "sample_euler",
    "sample_exact_many",
    "sample_joint_many",
    "sample_euler_many",
    "euler_variance",
    "MAX_JOINT_POINTS",
]

MAX_JOINT_POINTS = 4096
JITTER_SCALE = 1e-12


@dataclass(frozen=True)
class SeedSpec:
    """Address of one replicate's random stream."""

    root_seed: int
    replicate_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.root_seed) < 2 ** 64:
            raise DomainError(f"root_seed must be a 64-bit unsigned integer, got {self.root_seed!r}")
        if int(self.replicate_index) < 0:
            raise DomainError(f"replicate_index must be >= 0, got {self.replicate_index!r}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.root_seed), spawn_key=(int(self.replicate_index),))
        return np.random.Generator(np.random.Philox(seq))

    def normals(self, size: int) -> np.ndarray:
        return self.generator().standard_normal(size)


def uniform_grid(t_end: float, steps: int) -> TimeGrid:
    """``steps`` equal steps over ``[0, t_end]``."""
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps!r}")
    if not t_end > 0:
        raise DomainError(f"t_end must be > 0, got {t_end!r}")
    pts = np.arange(steps + 1, dtype=float) * (t_end / steps)
    pts[-1] = t_end
    return TimeGrid(pts)


def geometric_grid(horizon_T: float, t_end: float, ratio: float, t0: float = 0.0,
                   count: int | None = None) -> TimeGrid:
    """Grid accumulating at ``horizon_T``: points ``T - (T - t0) * ratio**k``.

    Points are kept while they stay below ``t_end``; ``t_end`` is appended as
    the last point. With ``count`` given, at most ``count`` geometric points
    (k = 0 .. count - 1) are generated before ``t_end``. A nonzero ``t0`` is
    preceded by 0.
    """
    if not 0 < ratio < 1:
        raise DomainError(f"geometric ratio must lie in (0, 1), got {ratio!r}")
    if not 0 <= t0 < t_end < horizon_T:
        raise DomainError(
            f"geometric grid requires 0 <= t0 < t_end < T, got t0={t0!r}, "
            f"t_end={t_end!r}, T={horizon_T!r}"
        )
    gap0 = horizon_T - t0
    n_max = math.ceil(math.log((horizon_T - t_end) / gap0) / math.log(ratio))
    if count is not None:
        n_max = min(n_max, int(count))
    k = np.arange(max(n_max, 1))
    pts = horizon_T - gap0 * ratio ** k
    pts[0] = t0
    # drop points that would sit within rounding distance of t_end
    pts = pts[(horizon_T - pts) > (horizon_T - t_end) * (1 + 1e-9)]
    head = [0.0] if t0 > 0 else []
    return TimeGrid(np.concatenate([head, pts, [t_end]]))


def merge_grids(grid: TimeGrid, extra) -> TimeGrid:
    """Union of a grid's points with extra time points."""
    return TimeGrid(np.union1d(grid.points, np.asarray(extra, dtype=float)))


def _validate(params: BridgeParams, grid: TimeGrid) -> None:
    grid.check_within(params.horizon_T)


def _seed_list(root_seed, indices):
    return [SeedSpec(root_seed, int(i)) for i in indices]


def _draw(seeds, n_steps):
    z = np.empty((len(seeds), n_steps))
    for row, seed in enumerate(seeds):
        z[row] = seed.normals(n_steps)
    return z


def _exact_unit(alpha, T, t, z):
    """Unit-sigma exact recursion on rows of standard normals ``z``."""
    factor, var = _transition_coeffs(alpha, T, t[:-1], t[1:])
    sd = np.sqrt(var)
    x = np.zeros((z.shape[0], t.size))
    for k in range(1, t.size):
        x[:, k] = factor[k - 1] * x[:, k - 1] + sd[k - 1] * z[:, k - 1]
    return x


def _euler_factors(alpha, T, t):
    dt = np.diff(t)
    ratio = alpha * dt / (T - t[:-1])
    bad = np.flatnonzero(ratio >= 1.0)
    if bad.size:
        k = int(bad[0])
        raise StepSizeError(
            f"Euler stability guard violated at step {k}: "
            f"alpha*dt/(T-t) = {ratio[k]!r} >= 1", k)
    return 1.0 - ratio, np.sqrt(dt)


def _euler_unit(alpha, T, t, z):
    damp, sqdt = _euler_factors(alpha, T, t)
    x = np.zeros((z.shape[0], t.size))
    for k in range(1, t.size):
        x[:, k] = damp[k - 1] * x[:, k - 1] + sqdt[k - 1] * z[:, k - 1]
    return x


def _joint_factor(params: BridgeParams, t):
    """Cholesky factor of the unit-sigma covariance on the nonzero grid points."""
    inner = t[1:]
    C = covariance(params.alpha, params.alpha, inner[:, None], inner[None, :],
                   params.horizon_T)
    C = 0.5 * (C + C.T)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_SCALE * np.trace(C) / inner.size
    try:
        return np.linalg.cholesky(C + jitter * np.eye(inner.size))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"covariance matrix not positive definite after jitter {jitter!r}") from exc


def sample_exact_many(params: BridgeParams, grid: TimeGrid, root_seed: int,
                      indices) -> np.ndarray:
    """Exact paths for several replicates, one row per index in ``indices``."""
    _validate(params, grid)
    t = grid.points
    z = _draw(_seed_list(root_seed, indices), t.size - 1)
    return params.sigma * _exact_unit(params.alpha, params.horizon_T, t, z)


def sample_euler_many(params: BridgeParams, grid: TimeGrid, root_seed: int,
                      indices) -> np.ndarray:
    _validate(params, grid)
    t = grid.points
    _euler_factors(params.alpha, params.horizon_T, t)  # guard before drawing
    z = _draw(_seed_list(root_seed, indices), t.size - 1)
    return params.sigma * _euler_unit(params.alpha, params.horizon_T, t, z)


def sample_joint_many(params: BridgeParams, grid: TimeGrid, root_seed: int,
                      indices) -> np.ndarray:
    _validate(params, grid)
    t = grid.points
    if t.size > MAX_JOINT_POINTS:
        raise DomainError(
            f"joint sampler limited to {MAX_JOINT_POINTS} grid points, got {t.size}")
    seeds = _seed_list(root_seed, indices)
    x = np.zeros((len(seeds), t.size))
    if t.size == 1:
        return x
    L = _joint_factor(params, t)
    # one matrix-vector product per replicate keeps rows independent of batch size
    for row, seed in enumerate(seeds):
        x[row, 1:] = L @ seed.normals(t.size - 1)
    return params.sigma * x


def _path(params, grid, values):
    return SamplePath(grid, values, params.horizon_T, params)


def sample_exact(params: BridgeParams, grid: TimeGrid, seed: SeedSpec) -> SamplePath:
    """Sample one path by the exact sequential transition law."""
    rows = sample_exact_many(params, grid, seed.root_seed, [seed.replicate_index])
    return _path(params, grid, rows[0])


def sample_joint(params: BridgeParams, grid: TimeGrid, seed: SeedSpec) -> SamplePath:
    """Sample one path as a single draw from the joint Gaussian law on the grid."""
    rows = sample_joint_many(params, grid, seed.root_seed, [seed.replicate_index])
    return _path(params, grid, rows[0])


def sample_euler(params: BridgeParams, grid: TimeGrid, seed: SeedSpec) -> SamplePath:
    """Sample one path by Euler-Maruyama.

    Raises
    ------
    StepSizeError
        If ``alpha * dt / (T - t_k) >= 1`` for some step ``k``.
    """
    rows = sample_euler_many(params, grid, seed.root_seed, [seed.replicate_index])
    return _path(params, grid, rows[0])


def euler_variance(params: BridgeParams, grid: TimeGrid) -> np.ndarray:
    """Exact variance of the Euler scheme at each grid point (no sampling).

    ``v_{k+1} = (1 - alpha dt_k / (T - t_k))**2 v_k + sigma**2 dt_k``.
    """
    _validate(params, grid)
    t = grid.points
    damp, _ = _euler_factors(params.alpha, params.horizon_T, t)
    dt = np.diff(t)
    v = np.zeros(t.size)
    s2 = params.sigma ** 2
    for k in range(1, t.size):
        v[k] = damp[k - 1] ** 2 * v[k - 1] + s2 * dt[k - 1]
    return v
