"""CSV interchange for sample paths: header ``t,x``, one row per grid point."""

from __future__ import annotations

import csv

import numpy as np

from .errors import DomainError
from .model import SamplePath


def _fmt(value):
    return format(float(value), ".17g")


def write_path_csv(path: SamplePath, out_path) -> None:
    with open(out_path, "w", newline="") as fh:
        fh.write("t,x\n")
        for t, x in zip(path.t, path.x):
            fh.write(f"{_fmt(t)},{_fmt(x)}\n")


def read_path_csv(in_path, horizon_T: float) -> SamplePath:
    """Read a ``t,x`` CSV written by :func:`write_path_csv`.

    Raises
    ------
    OSError
        If the file cannot be read.
    DomainError
        If the header is missing, a row is malformed, or the path is invalid.
    """
    with open(in_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "x"]:
        raise DomainError(f"{in_path}: expected header 't,x'")
    t, x = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise DomainError(f"{in_path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            t.append(float(row[0]))
            x.append(float(row[1]))
        except ValueError as exc:
            raise DomainError(f"{in_path}:{lineno}: {exc}") from None
    if not t:
        raise DomainError(f"{in_path}: no data rows")
    return SamplePath.from_arrays(np.array(t), np.array(x), horizon_T)
