"""CSV and JSON helpers with full float precision and LF line endings."""
import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(x):
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def write_rows(path, rows, columns=None):
    """Write a list of dicts (or dataclass rows with ``as_dict``) as CSV."""
    rows = [r.as_dict() if hasattr(r, "as_dict") else dict(r) for r in rows]
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])


def write_matrix(path, A, header=None, prefix="x"):
    """Write a matrix (or vector) as CSV with a generated header."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if header is None:
        header = [f"{prefix}{j}" for j in range(A.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in A:
            w.writerow([fmt(v) for v in row])


def read_matrix(path):
    """Dense numeric CSV with one header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path} has a header but no data")
    try:
        A = np.array([[float(v) for v in r] for r in body])
    except ValueError as e:
        raise ValueError(f"{path}: non-numeric entry ({e})") from None
    return A


def read_rows(path):
    """CSV rows as a list of dicts."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        o = float(o)
        return o if math.isfinite(o) else fmt(o)
    if isinstance(o, Path):
        return str(o)
    return o


def write_json(path, obj):
    """Write JSON with sorted keys, converting numpy types."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    """Load a JSON file."""
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
