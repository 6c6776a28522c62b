"""Deterministic serialization: CSV tables, JSON records, plot series.

Floats go to CSV with 17 significant digits; JSON uses Python's shortest
round-trip repr. Neither carries timestamps, so identical inputs give
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class MissingColumnError(KeyError):
    def __str__(self):
        return self.args[0]


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(value)


def write_csv(path: Path | str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_csv(path: Path | str) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path | str, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


ROUND_COLUMNS = ["round", "time", "p_cond", "p_abs", "cumulative", "remaining", "decayed"]


def rounds_table(record) -> list[dict]:
    return [
        {"round": k + 1, "time": r.time, "p_cond": r.p_cond, "p_abs": r.p_abs, "cumulative": r.cumulative,
         "remaining": r.remaining, "decayed": r.decayed}
        for k, r in enumerate(record.rounds)
    ]


def write_rounds(path, record) -> Path:
    rows = rounds_table(record)
    return write_csv(path, ROUND_COLUMNS, ([row[c] for c in ROUND_COLUMNS] for row in rows))


def write_table(path, columns: Sequence[str], table: Sequence[dict]) -> Path:
    return write_csv(path, columns, ([row.get(c, "") for c in columns] for row in table))


def emit_plot_series(table: Sequence[dict], x: str, y: str, group: str | None = None,
                     path: Path | str | None = None) -> list[tuple]:
    """Long-format (group, x, y) rows in table order; optionally written to CSV."""
    available = list(table[0].keys()) if table else []
    if table:
        for col in (x, y) + ((group,) if group else ()):
            if col not in table[0]:
                raise MissingColumnError(f"column {col!r} not found; available: {', '.join(available)}")
    rows = [(row[group] if group else "all", row[x], row[y]) for row in table]
    if path is not None:
        write_csv(path, ["group", "x", "y"], rows)
    return rows
