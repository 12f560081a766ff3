"""
Declarative Monte Carlo experiments.

An :class:`ExperimentSpec` names one of seven kinds, the model parameters
(one cell per parameter set), a grid policy, replicate count, observation
horizons and a root seed. :func:`run_experiment` simulates, aggregates and
judges the recorded statistics against thresholds. Replicates are addressed
by index and may run on several threads; results are identical to a serial
run.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import math
import os
import time

import numpy as np
from scipy import stats

from .errors import BridgeError, DomainError, SpecError
from .estimators import _mle, nearest_candidate, trapezoid_energy
from .model import BridgeParams, SamplePath, TimeGrid, covariance, limit_variance
from .path_stats import WindowSpec, envelope_ratio, rescaled_terminal, sign_split
from .pathio import write_path_csv
from .samplers import (
    geometric_grid,
    merge_grids,
    sample_euler_many,
    sample_exact_many,
    sample_joint_many,
    uniform_grid,
)

__all__ = [
    "KINDS",
    "ExperimentSpec",
    "ExperimentSummary",
    "run_experiment",
    "persist_summary",
    "load_summary",
    "load_spec",
    "canonical_json",
]

KINDS = (
    "covariance-check",
    "consistency-sweep",
    "classification",
    "qv-dichotomy",
    "terminal-behavior",
    "lil-diagnostic",
    "rescaled-limit",
)

GRID_POLICIES = ("points", "uniform", "geometric", "dyadic")

SAMPLERS = {
    "exact": sample_exact_many,
    "joint": sample_joint_many,
    "euler": sample_euler_many,
}

DEFAULT_THRESHOLDS = {
    "covariance-check": {"max_z": 4.0},
    "consistency-sweep": {
        "max_final_median_error": 0.15,
        "require_error_decreasing": True,
        "require_energy_increasing": True,
    },
    "classification": {"min_accuracy": 0.95},
    "qv-dichotomy": {"max_final_rel_error": 0.03, "min_nonincreasing": 7},
    "terminal-behavior": {
        "max_p99_abs": 0.06,
        "max_frac_small": 0.01,
        "frac_plus_lo": 0.44,
        "frac_plus_hi": 0.56,
    },
    "lil-diagnostic": {"median_sup_lo": 0.5, "median_sup_hi": 1.3},
    "rescaled-limit": {"max_ks": 0.03},
}

CHUNK = 256


# ---------------------------------------------------------------- spec


def _require(cond, fieldpath, message):
    if not cond:
        raise SpecError(fieldpath, message)


def _number(value, fieldpath):
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             fieldpath, f"expected a number, got {value!r}")
    _require(math.isfinite(value), fieldpath, "must be finite")
    return float(value)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    params: tuple
    grid: dict
    replicates: int
    horizons: tuple = ()
    candidates: tuple = ()
    root_seed: int = 0
    method: str = "exact"
    threshold: float = 10.0
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentSpec:
        _require(isinstance(data, dict), "spec", "expected a JSON object")
        known = {"kind", "params", "grid", "replicates", "horizons", "candidates",
                 "root_seed", "method", "threshold", "thresholds"}
        for key in data:
            _require(key in known, f"spec.{key}", "unknown field")
        for key in ("kind", "params", "grid", "replicates", "root_seed"):
            _require(key in data, f"spec.{key}", "missing required field")
        raw = data["params"]
        raw_list = raw if isinstance(raw, list) else [raw]
        _require(len(raw_list) > 0, "spec.params", "must not be empty")
        params = []
        for i, p in enumerate(raw_list):
            where = f"spec.params[{i}]" if isinstance(raw, list) else "spec.params"
            _require(isinstance(p, dict), where, "expected an object")
            for key in p:
                _require(key in ("alpha", "sigma", "horizon_T"), f"{where}.{key}", "unknown field")
            _require("alpha" in p, f"{where}.alpha", "missing required field")
            values = {k: _number(v, f"{where}.{k}") for k, v in p.items()}
            try:
                params.append(BridgeParams(**values))
            except DomainError as exc:
                raise SpecError(where, str(exc)) from None
        seed = data["root_seed"]
        _require(isinstance(seed, int) and not isinstance(seed, bool), "spec.root_seed",
                 "expected an integer")
        reps = data["replicates"]
        _require(isinstance(reps, int) and not isinstance(reps, bool), "spec.replicates",
                 "expected an integer")
        horizons = data.get("horizons", [])
        _require(isinstance(horizons, list), "spec.horizons", "expected a list")
        candidates = data.get("candidates", [])
        _require(isinstance(candidates, list), "spec.candidates", "expected a list")
        thresholds = data.get("thresholds", {})
        _require(isinstance(thresholds, dict), "spec.thresholds", "expected an object")
        return cls(
            kind=data["kind"],
            params=tuple(params),
            grid=dict(data["grid"]) if isinstance(data["grid"], dict) else data["grid"],
            replicates=reps,
            horizons=tuple(_number(h, f"spec.horizons[{i}]") for i, h in enumerate(horizons)),
            candidates=tuple(_number(c, f"spec.candidates[{i}]")
                             for i, c in enumerate(candidates)),
            root_seed=seed,
            method=data.get("method", "exact"),
            threshold=_number(data.get("threshold", 10.0), "spec.threshold"),
            thresholds=dict(thresholds),
        )

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "params": [{"alpha": p.alpha, "sigma": p.sigma, "horizon_T": p.horizon_T}
                       for p in self.params],
            "grid": dict(self.grid),
            "replicates": self.replicates,
            "horizons": list(self.horizons),
            "root_seed": self.root_seed,
            "method": self.method,
        }
        if self.candidates:
            out["candidates"] = list(self.candidates)
        if self.kind == "terminal-behavior":
            out["threshold"] = self.threshold
        if self.thresholds:
            out["thresholds"] = dict(self.thresholds)
        return out

    def resolved_thresholds(self) -> dict:
        merged = dict(DEFAULT_THRESHOLDS[self.kind])
        merged.update(self.thresholds)
        return merged

    def validate(self) -> None:
        _require(self.kind in KINDS, "spec.kind", f"must be one of {', '.join(KINDS)}")
        _require(self.method in SAMPLERS, "spec.method",
                 f"must be one of {', '.join(SAMPLERS)}")
        _require(self.replicates >= 1, "spec.replicates", "must be >= 1")
        _require(0 <= self.root_seed < 2 ** 64, "spec.root_seed",
                 "must be a 64-bit unsigned integer")
        _require(self.threshold > 0, "spec.threshold", "must be > 0")
        for key in self.thresholds:
            _require(key in DEFAULT_THRESHOLDS[self.kind], f"spec.thresholds.{key}",
                     f"not a threshold of kind {self.kind}")
        Ts = {p.horizon_T for p in self.params}
        for i, h in enumerate(self.horizons):
            _require(0 < h < min(Ts), f"spec.horizons[{i}]",
                     f"must lie in (0, T), got {h!r}")
        _require(list(self.horizons) == sorted(set(self.horizons)), "spec.horizons",
                 "must be strictly increasing")
        needs_horizon = {"consistency-sweep", "classification", "qv-dichotomy",
                         "terminal-behavior", "rescaled-limit"}
        if self.kind in needs_horizon:
            _require(len(self.horizons) >= 1, "spec.horizons", "at least one horizon required")
        if self.kind == "lil-diagnostic":
            _require(len(self.horizons) == 2, "spec.horizons",
                     "lil-diagnostic needs the window [t_lo, t_hi] as two horizons")
            for i, p in enumerate(self.params):
                _require(p.alpha >= 0.5, f"spec.params[{i}].alpha",
                         "lil-diagnostic requires alpha >= 1/2")
        if self.kind == "rescaled-limit":
            for i, p in enumerate(self.params):
                _require(p.alpha < 0.5, f"spec.params[{i}].alpha",
                         "rescaled-limit requires alpha < 1/2")
        if self.kind == "classification":
            _require(len(self.params) >= 2, "spec.params",
                     "classification needs one parameter set per class")
            _require(len({p.alpha for p in self.params}) == len(self.params), "spec.params",
                     "class alphas must be distinct")
        if self.kind == "qv-dichotomy":
            _require(self.grid.get("policy") == "dyadic", "spec.grid.policy",
                     "qv-dichotomy requires the dyadic policy")
        for i, p in enumerate(self.params):
            self.build_grid(p, where=f"spec.params[{i}]")

    def build_grid(self, params: BridgeParams, where="spec") -> TimeGrid:
        g = self.grid
        _require(isinstance(g, dict), "spec.grid", "expected an object")
        policy = g.get("policy")
        _require(policy in GRID_POLICIES, "spec.grid.policy",
                 f"must be one of {', '.join(GRID_POLICIES)}")
        allowed = {
            "points": {"policy", "points"},
            "uniform": {"policy", "step"},
            "geometric": {"policy", "ratio", "count"},
            "dyadic": {"policy", "min_level", "max_level"},
        }[policy]
        for key in g:
            _require(key in allowed, f"spec.grid.{key}", f"not a field of policy {policy}")
        T = params.horizon_T
        t_end = self.horizons[-1] if self.horizons else None
        try:
            if policy == "points":
                pts = g.get("points")
                _require(isinstance(pts, list) and pts, "spec.grid.points",
                         "expected a nonempty list")
                pts = [_number(p, f"spec.grid.points[{i}]") for i, p in enumerate(pts)]
                grid = TimeGrid(np.union1d([0.0], pts))
            elif policy == "uniform":
                step = _number(g.get("step"), "spec.grid.step")
                _require(step > 0, "spec.grid.step", "must be > 0")
                _require(t_end is not None, "spec.horizons", "uniform policy needs a horizon")
                grid = uniform_grid(t_end, max(1, round(t_end / step)))
            elif policy == "geometric":
                ratio = _number(g.get("ratio"), "spec.grid.ratio")
                _require(0 < ratio < 1, "spec.grid.ratio", "must lie in (0, 1)")
                _require(t_end is not None, "spec.horizons", "geometric policy needs a horizon")
                count = g.get("count")
                grid = geometric_grid(T, t_end, ratio, count=count)
            else:
                lo, hi = g.get("min_level"), g.get("max_level")
                _require(isinstance(lo, int) and isinstance(hi, int) and 0 <= lo <= hi <= 24,
                         "spec.grid", "dyadic policy needs integer 0 <= min_level <= max_level <= 24")
                _require(t_end is not None, "spec.horizons", "dyadic policy needs a horizon")
                return uniform_grid(self.horizons[0], 2 ** hi)
            if self.horizons:
                grid = merge_grids(grid, self.horizons)
            grid.check_within(T)
        except DomainError as exc:
            raise SpecError(f"{where} / spec.grid", str(exc)) from None
        return grid


def load_spec(in_path) -> ExperimentSpec:
    with open(in_path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError("spec", f"{in_path}: invalid JSON ({exc})") from None
    return ExperimentSpec.from_dict(data)


# ---------------------------------------------------------------- summary


@dataclass
class ExperimentSummary:
    kind: str
    root_seed: int
    replicates: int
    cells: list
    checks: list
    passed: bool
    failures: int
    spec: dict = field(default_factory=dict)
    wall_clock_seconds: float = field(default=0.0, compare=False)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "kind": self.kind,
            "root_seed": self.root_seed,
            "replicates": self.replicates,
            "cells": self.cells,
            "checks": self.checks,
            "passed": self.passed,
            "failures": self.failures,
            "spec": self.spec,
        }
        if include_timing:
            out["wall_clock_seconds"] = self.wall_clock_seconds
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentSummary:
        return cls(
            kind=data["kind"], root_seed=data["root_seed"], replicates=data["replicates"],
            cells=data["cells"], checks=data["checks"], passed=data["passed"],
            failures=data["failures"], spec=data.get("spec", {}),
            wall_clock_seconds=data.get("wall_clock_seconds", 0.0),
        )


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return format(value, ".17g") if math.isfinite(value) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def canonical_json(obj, indent: int = 2) -> str:
    """JSON with sorted keys and floats at 17 significant digits; NaN becomes null."""
    return _encode(obj, indent, 0) + "\n"


def persist_summary(summary: ExperimentSummary, out_path, include_timing: bool = False) -> None:
    """Write the summary as canonical JSON.

    Wall-clock time is left out unless ``include_timing`` is set, so two runs
    with the same seed produce byte-identical files.
    """
    text = canonical_json(summary.to_dict(include_timing=include_timing))
    try:
        with open(out_path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write summary: {exc.strerror}", str(out_path)) from None


def load_summary(in_path) -> ExperimentSummary:
    with open(in_path) as fh:
        return ExperimentSummary.from_dict(json.load(fh))


# ---------------------------------------------------------------- simulation


def _simulate(spec: ExperimentSpec, params: BridgeParams, grid: TimeGrid, workers: int):
    """All replicate paths of one cell as a (replicates, n) array, rows keyed by index."""
    sampler = SAMPLERS[spec.method]
    out = np.empty((spec.replicates, len(grid)))
    chunks = [range(lo, min(lo + CHUNK, spec.replicates))
              for lo in range(0, spec.replicates, CHUNK)]

    def work(idx):
        out[idx.start:idx.stop] = sampler(params, grid, spec.root_seed, idx)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, chunks))
    else:
        for idx in chunks:
            work(idx)
    return out


def _bad_rows(paths):
    return ~np.all(np.isfinite(paths), axis=1)


def _se(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 2:
        return float("nan")
    return float(np.std(v, ddof=1) / math.sqrt(v.size))


def _check(name, value, passed, limit=None, cell=None):
    out = {"name": name, "value": value, "passed": bool(passed)}
    if limit is not None:
        out["limit"] = limit
    if cell is not None:
        out["cell"] = cell
    return out


def _cell_header(params):
    return {"alpha": params.alpha, "sigma": params.sigma, "horizon_T": params.horizon_T}


def _index_of(grid, t):
    k = int(np.searchsorted(grid.points, t))
    if k >= len(grid) or grid.points[k] != t:
        raise DomainError(f"horizon {t!r} is not a grid point")
    return k


def _covariance_check(spec, th, ctx):
    cells, checks, failures = [], [], 0
    for c, params in enumerate(spec.params):
        grid, paths = ctx.cell(c)
        bad = _bad_rows(paths)
        failures += int(bad.sum())
        X = paths[~bad][:, 1:]
        times = grid.points[1:]
        n = X.shape[0]
        mean = X.mean(axis=0)
        mean_se = X.std(axis=0, ddof=1) / math.sqrt(n)
        prods = X[:, :, None] * X[:, None, :]
        emp = prods.mean(axis=0)
        se = prods.std(axis=0, ddof=1) / math.sqrt(n)
        exact = params.sigma ** 2 * covariance(params.alpha, params.alpha,
                                               times[:, None], times[None, :],
                                               params.horizon_T)
        dev = np.abs(emp - exact)
        cov_z = float(np.max(dev / se))
        mean_z = float(np.max(np.abs(mean) / mean_se))
        cell = _cell_header(params)
        cell.update({
            "times": times, "n_used": n,
            "cov_max_abs_dev": float(np.max(dev)),
            "cov_max_z": cov_z,
            "cov_min_se": float(np.min(se)),
            "mean_max_z": mean_z,
            "mean_min_se": float(np.min(mean_se)),
        })
        cells.append(cell)
        checks.append(_check("cov_max_z", cov_z, cov_z <= th["max_z"], th["max_z"], c))
        checks.append(_check("mean_max_z", mean_z, mean_z <= th["max_z"], th["max_z"], c))
    return cells, checks, failures


def _mle_rows(paths, grid, T, k):
    s = grid.points[:k + 1]
    est, energy = np.full(paths.shape[0], np.nan), np.full(paths.shape[0], np.nan)
    for i, x in enumerate(paths[:, :k + 1]):
        energy[i] = trapezoid_energy(s, x, T)
        try:
            est[i] = _mle(s, x, T, 1.0)[0]
        except BridgeError:
            pass
    return est, energy


def _strictly(values, increasing):
    v = np.asarray(values, dtype=float)
    if v.size < 2 or not np.all(np.isfinite(v)):
        return False
    d = np.diff(v)
    return bool(np.all(d > 0) if increasing else np.all(d < 0))


def _consistency_sweep(spec, th, ctx):
    cells, checks, failures = [], [], 0
    for c, params in enumerate(spec.params):
        grid, paths = ctx.cell(c)
        bad = _bad_rows(paths)
        failures += int(bad.sum())
        paths = paths[~bad]
        per_h = []
        for h in spec.horizons:
            est, energy = _mle_rows(paths, grid, params.horizon_T, _index_of(grid, h))
            ok = np.isfinite(est)
            failures += int((~ok).sum())
            err = np.abs(est[ok] - params.alpha)
            per_h.append({
                "horizon": h,
                "n_used": int(ok.sum()),
                "median_abs_error": float(np.median(err)) if err.size else float("nan"),
                "mean_alpha_hat": float(np.mean(est[ok])) if err.size else float("nan"),
                "se_alpha_hat": _se(est),
                "median_energy": float(np.median(energy)),
                "se_energy": _se(energy),
            })
        cell = _cell_header(params)
        cell["horizons"] = per_h
        cells.append(cell)
        errs = [r["median_abs_error"] for r in per_h]
        energies = [r["median_energy"] for r in per_h]
        if th["require_energy_increasing"]:
            checks.append(_check("median_energy_strictly_increasing", energies,
                                 _strictly(energies, True), cell=c))
        if th["require_error_decreasing"]:
            checks.append(_check("median_error_strictly_decreasing", errs,
                                 _strictly(errs, False), cell=c))
        if th["max_final_median_error"] is not None:
            lim = th["max_final_median_error"]
            checks.append(_check("final_median_abs_error", errs[-1], errs[-1] <= lim, lim, c))
    return cells, checks, failures


def _classification(spec, th, ctx):
    candidates = sorted(spec.candidates) if spec.candidates else sorted(
        p.alpha for p in spec.params)
    cells, failures, correct, total = [], 0, 0, 0
    for c, params in enumerate(spec.params):
        grid, paths = ctx.cell(c)
        bad = _bad_rows(paths)
        k = _index_of(grid, spec.horizons[-1])
        est = np.full(paths.shape[0], np.nan)
        good = np.flatnonzero(~bad)
        est[good], _ = _mle_rows(paths[good], grid, params.horizon_T, k)
        row = [0] * len(candidates)
        degenerate = 0
        for a in est:
            if not np.isfinite(a):
                degenerate += 1
                continue
            row[candidates.index(nearest_candidate(a, candidates))] += 1
        failures += degenerate
        hits = row[candidates.index(params.alpha)] if params.alpha in candidates else 0
        correct += hits
        total += paths.shape[0]
        cell = _cell_header(params)
        cell.update({
            "confusion_row": row,
            "degenerate": degenerate,
            "accuracy": hits / paths.shape[0],
            "median_alpha_hat": float(np.nanmedian(est)),
            "se_alpha_hat": _se(est),
            "candidates": candidates,
        })
        cells.append(cell)
    accuracy = correct / total
    checks = [_check("accuracy", accuracy, accuracy >= th["min_accuracy"], th["min_accuracy"])]
    return cells, checks, failures


def _qv_dichotomy(spec, th, ctx):
    lo, hi = spec.grid["min_level"], spec.grid["max_level"]
    cells, checks, failures = [], [], 0
    for c, params in enumerate(spec.params):
        grid, paths = ctx.cell(c)
        bad = _bad_rows(paths)
        failures += int(bad.sum())
        paths = paths[~bad]
        span = grid.points[-1] - grid.points[0]
        target = params.sigma ** 2
        levels = []
        for level in range(lo, hi + 1):
            stride = 2 ** (hi - level)
            dx = np.diff(paths[:, ::stride], axis=1)
            est = np.sum(dx * dx, axis=1) / span
            levels.append({
                "level": level,
                "median_sigma2": float(np.median(est)),
                "median_abs_error": float(np.median(np.abs(est - target))),
                "se_sigma2": _se(est),
            })
        errs = [r["median_abs_error"] for r in levels]
        nonincr = int(np.sum(np.diff(errs) <= 0))
        final_rel = abs(levels[-1]["median_sigma2"] - target) / target
        cell = _cell_header(params)
        cell.update({"t": float(grid.points[-1]), "levels": levels,
                     "nonincreasing_steps": nonincr, "final_rel_error": final_rel})
        cells.append(cell)
        checks.append(_check("final_rel_error", final_rel,
                             final_rel <= th["max_final_rel_error"],
                             th["max_final_rel_error"], c))
        checks.append(_check("nonincreasing_steps", nonincr,
                             nonincr >= th["min_nonincreasing"], th["min_nonincreasing"], c))
    return cells, checks, failures


def _terminal_behavior(spec, th, ctx):
    cells, checks, failures = [], [], 0
    for c, params in enumerate(spec.params):
        grid, paths = ctx.cell(c)
        bad = _bad_rows(paths)
        failures += int(bad.sum())
        paths = paths[~bad]
        k = _index_of(grid, spec.horizons[0])
        vals = paths[:, k]
        plus, minus, small = sign_split(vals, spec.threshold)
        p99 = float(np.quantile(np.abs(vals), 0.99))
        cell = _cell_header(params)
        cell.update({
            "t": spec.horizons[0], "threshold": spec.threshold,
            "p99_abs": p99, "median_abs": float(np.median(np.abs(vals))),
            "sd": float(np.std(vals, ddof=1)) if vals.size > 1 else float("nan"),
            "frac_plus": plus, "frac_minus": minus, "frac_small": small,
        })
        if len(spec.horizons) > 1:
            k_hi = _index_of(grid, spec.horizons[-1])
            sup = np.max(np.abs(paths[:, k:k_hi + 1]), axis=1)
            cell["p99_window_sup"] = float(np.quantile(sup, 0.99))
        cells.append(cell)
        if params.alpha > 0:
            lim = th["max_p99_abs"]
            checks.append(_check("p99_abs", p99, p99 <= lim, lim, c))
        elif params.alpha < 0:
            lim = th["max_frac_small"]
            checks.append(_check("frac_small", small, small <= lim, lim, c))
            band = [th["frac_plus_lo"], th["frac_plus_hi"]]
            checks.append(_check("frac_plus", plus, band[0] <= plus <= band[1], band, c))
    return cells, checks, failures


def _lil_diagnostic(spec, th, ctx):
    cells, checks, failures = [], [], 0
    window = WindowSpec(spec.horizons[0], spec.horizons[1])
    band = [th["median_sup_lo"], th["median_sup_hi"]]
    for c, params in enumerate(spec.params):
        grid, paths = ctx.cell(c)
        bad = _bad_rows(paths)
        failures += int(bad.sum())
        sups, infs = [], []
        for x in paths[~bad]:
            path = SamplePath(grid, x, params.horizon_T)
            hi, lo = envelope_ratio(path, params.alpha, window)
            sups.append(hi)
            infs.append(lo)
        sups, infs = np.array(sups), np.array(infs)
        med = float(np.median(sups))
        cell = _cell_header(params)
        cell.update({
            "window": [window.t_lo, window.t_hi],
            "median_sup_ratio": med, "median_inf_ratio": float(np.median(infs)),
            "quartiles_sup_ratio": np.quantile(sups, [0.25, 0.75]).tolist(),
            "se_sup_ratio": _se(sups),
        })
        cells.append(cell)
        checks.append(_check("median_sup_ratio", med, band[0] <= med <= band[1], band, c))
    return cells, checks, failures


def _rescaled_limit(spec, th, ctx):
    cells, checks, failures = [], [], 0
    for c, params in enumerate(spec.params):
        grid, paths = ctx.cell(c)
        bad = _bad_rows(paths)
        failures += int(bad.sum())
        k = _index_of(grid, spec.horizons[0])
        sub = TimeGrid(grid.points[:k + 1])
        vals = np.array([
            rescaled_terminal(SamplePath(sub, x[:k + 1], params.horizon_T), params.alpha)
            for x in paths[~bad]])
        var = params.sigma ** 2 * limit_variance(params.alpha, params.horizon_T)
        ks = float(stats.kstest(vals, "norm", args=(0.0, math.sqrt(var))).statistic)
        cell = _cell_header(params)
        cell.update({
            "t": spec.horizons[0], "limit_variance": var,
            "mean": float(np.mean(vals)), "se_mean": _se(vals),
            "variance": float(np.var(vals, ddof=1)) if vals.size > 1 else float("nan"),
            "ks_distance": ks,
        })
        cells.append(cell)
        checks.append(_check("ks_distance", ks, ks <= th["max_ks"], th["max_ks"], c))
    return cells, checks, failures


class _Context:
    """Lazily simulates each cell once and optionally dumps raw paths."""

    def __init__(self, spec, workers, dump_dir):
        self.spec, self.workers, self.dump_dir = spec, workers, dump_dir

    def cell(self, c):
        params = self.spec.params[c]
        grid = self.spec.build_grid(params)
        paths = _simulate(self.spec, params, grid, self.workers)
        if self.dump_dir is not None:
            for i, x in enumerate(paths):
                if np.all(np.isfinite(x)):
                    write_path_csv(SamplePath(grid, x, params.horizon_T),
                                   os.path.join(self.dump_dir, f"cell{c:02d}_rep{i:06d}.csv"))
        return grid, paths


_RUNNERS = {
    "covariance-check": _covariance_check,
    "consistency-sweep": _consistency_sweep,
    "classification": _classification,
    "qv-dichotomy": _qv_dichotomy,
    "terminal-behavior": _terminal_behavior,
    "lil-diagnostic": _lil_diagnostic,
    "rescaled-limit": _rescaled_limit,
}


def run_experiment(spec: ExperimentSpec, workers: int = 1, dump_dir=None) -> ExperimentSummary:
    """Run ``spec`` and judge its statistics against the kind's thresholds.

    Parameters
    ----------
    workers : int
        Threads used for replicate simulation. The result does not depend on it.
    dump_dir : path, optional
        If given, every finite replicate path is written there as ``t,x`` CSV.
    """
    if dump_dir is not None and not os.path.isdir(dump_dir):
        raise OSError(2, "dump directory does not exist", str(dump_dir))
    start = time.perf_counter()
    th = spec.resolved_thresholds()
    ctx = _Context(spec, max(1, int(workers)), dump_dir)
    cells, checks, failures = _RUNNERS[spec.kind](spec, th, ctx)
    summary = ExperimentSummary(
        kind=spec.kind,
        root_seed=spec.root_seed,
        replicates=spec.replicates,
        cells=_plain(cells),
        checks=_plain(checks),
        passed=all(ch["passed"] for ch in checks),
        failures=failures,
        spec=_plain(spec.to_dict()),
        wall_clock_seconds=time.perf_counter() - start,
    )
    return summary


def _plain(obj):
    """Convert numpy containers/scalars to JSON-native Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj
