"""CSV and JSON manifest writers shared by the command line tool."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

__all__ = ["write_csv", "write_json", "to_jsonable", "format_float"]


def format_float(v) -> str:
    """Shortest round-trip repr, independent of locale."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def write_csv(path: str | Path | None, header: list[str], columns) -> str | None:
    """Write equal-length columns with a header row; ``None`` or ``"-"`` writes to stdout."""
    cols = [np.asarray(c) for c in columns]
    n = {c.shape[0] for c in cols}
    if len(n) > 1:
        raise ValueError(f"columns have different lengths {sorted(n)}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow([format_float(v) if np.ndim(v) == 0 and not isinstance(v, str) else v for v in row])
    if path is None or str(path) == "-":
        sys.stdout.write(buf.getvalue())
        return None
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue())
    return str(path)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_json(path: str | Path, data: dict) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(to_jsonable(data), sort_keys=True, indent=2) + "\n")
    return str(path)
