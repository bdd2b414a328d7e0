"""Plain-text grid dumps and CSV writing.

Torus dump: header ``torus n`` then n rows of n values.
Box dump:   header ``box L m`` then m rows of m values.
Rows are the first array index, values are written with 17 significant digits.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .cell import TorusField
from .solver import BoxGrid, DiscreteField

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % float(x)
    return str(x)


def _write_rows(path: Path, header: str, values: np.ndarray):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, values, fmt=FLOAT_FMT)


def dump_torus(path, field: TorusField):
    _write_rows(Path(path), f"torus {field.n}", field.values)


def load_torus(path) -> TorusField:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 2 or head[0] != "torus":
            raise ValueError(f"{path}: not a torus dump")
        n = int(head[1])
        values = np.loadtxt(fh, ndmin=2)
    return TorusField(n, values.reshape(n, n))


def dump_box(path, field: DiscreteField):
    g = field.grid
    _write_rows(Path(path), f"box {fmt(g.half_width)} {g.m}", field.values)


def load_box(path, tag: str = "u_eps") -> DiscreteField:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 3 or head[0] != "box":
            raise ValueError(f"{path}: not a box dump")
        grid = BoxGrid(float(head[1]), int(head[2]))
        values = np.loadtxt(fh, ndmin=2)
    return DiscreteField(grid, values.reshape(grid.m, grid.m), tag=tag)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def write_segments(path, curve):
    rows = ({"x0": s[0, 0], "y0": s[0, 1], "x1": s[1, 0], "y1": s[1, 1]} for s in curve.segments)
    write_csv(path, ("x0", "y0", "x1", "y1"), rows)
