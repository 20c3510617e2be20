"""Point-cloud CSV files: one point per row, optional single header row."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from maxgap.geometry import PointCloud


class DataError(ValueError):
    """Malformed or out-of-range input data."""


def _parse_row(row, lineno):
    try:
        vals = [float(x) for x in row]
    except ValueError:
        raise DataError(f"row {lineno}: non-numeric value in {row!r}") from None
    for v in vals:
        if not math.isfinite(v):
            raise DataError(f"row {lineno}: non-finite coordinate {v!r}")
        if v < 0.0 or v > 1.0:
            raise DataError(f"row {lineno}: coordinate {v!r} outside [0, 1]")
    return vals


def read_points(path) -> PointCloud:
    """Read a point cloud; rows are numbered by their line in the file."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")

    dim = None
    first_line, first = rows[0]
    try:
        [float(x) for x in first]
    except ValueError:
        dim = len(first)
        rows = rows[1:]

    pts = []
    for lineno, row in rows:
        vals = _parse_row(row, lineno)
        if dim is None:
            dim = len(vals)
        elif len(vals) != dim:
            raise DataError(f"row {lineno}: expected {dim} columns, found {len(vals)}")
        pts.append(vals)
    return PointCloud(np.array(pts, dtype=float).reshape(-1, dim), dim=dim)


def write_points(path, cloud: PointCloud) -> None:
    """Write ``cloud`` with a header row; floats are written with ``repr`` so they round-trip."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(cloud.dim)])
        for p in cloud.points:
            w.writerow([repr(float(v)) for v in p])
