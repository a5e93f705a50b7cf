"""CSV reading and writing.

Comma separator, `.` decimal, one optional header row.  Floats are
written with 17 significant digits so values round-trip bit for bit.
"""

import csv
import math

import numpy as np

from .exceptions import ParameterError

_FMT = "%.17g"


def format_float(x):
    return _FMT % x


def write_columns_csv(path, names, columns):
    """Write named columns of equal length to a CSV file."""
    columns = [np.asarray(c) for c in columns]
    if len(names) != len(columns):
        raise ParameterError("names and columns must match")
    length = columns[0].shape[0]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for r in range(length):
            fields = []
            for c in columns:
                v = c[r]
                if isinstance(v, (np.integer, int)):
                    fields.append(str(int(v)))
                elif isinstance(v, (np.floating, float)):
                    fields.append(_FMT % v)
                else:
                    fields.append(str(v))
            fh.write(",".join(fields) + "\n")


def write_points_csv(path, points):
    """Write a point cloud with an x1..xm header row."""
    points = np.asarray(points, dtype=np.float64)
    names = [f"x{s + 1}" for s in range(points.shape[1])]
    write_columns_csv(path, names, [points[:, s] for s in range(points.shape[1])])


def read_points_csv(path):
    """Read a samples CSV into an (n, m) float array.

    The first row may be a header.  Ragged rows, non-numeric cells and
    non-finite values are rejected with the offending row number.
    """
    rows = []
    header_skipped = False
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (len(rec) == 1 and rec[0].strip() == ""):
                continue
            try:
                vals = [float(cell) for cell in rec]
            except ValueError:
                if lineno == 1 and not header_skipped:
                    header_skipped = True
                    continue
                raise ParameterError(
                    f"{path}: non-numeric value in row {lineno}")
            if any(not math.isfinite(v) for v in vals):
                raise ParameterError(
                    f"{path}: non-finite value in row {lineno}")
            if rows and len(vals) != len(rows[0]):
                raise ParameterError(
                    f"{path}: row {lineno} has {len(vals)} columns, "
                    f"expected {len(rows[0])}")
            rows.append(vals)
    if not rows:
        raise ParameterError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)
