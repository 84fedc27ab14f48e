"""Deterministic CSV/JSON writers and the shipped JSON schemas."""
from __future__ import annotations

import csv
import io
import json
import math
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

FORMAT_VERSION = "1"


def fmt(x):
    """Shortest round-trip decimal for a float; ints and bools pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def table_csv(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def series_csv(series_list):
    """One CSV for spectra that share a grid: ``omega_over_<unit>,S_...``."""
    first = series_list[0]
    for s in series_list[1:]:
        if s.unit != first.unit or not np.array_equal(s.grid, first.grid):
            raise ValueError("series do not share a grid")
    columns = [first.grid_name] + [s.column_name for s in series_list]
    rows = zip(first.grid, *(s.values for s in series_list))
    return table_csv(columns, rows)


def series_json(series_list):
    first = series_list[0]
    return document(
        "series",
        grid_name=first.grid_name,
        grid=[_clean(v) for v in first.grid],
        series=[
            {"kind": s.kind, "column": s.column_name, "values": [_clean(v) for v in s.values]}
            for s in series_list
        ],
    )


def _clean(obj):
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def document(schema, **body):
    return _clean({"schema": schema, "format_version": FORMAT_VERSION, **body})


def dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


@lru_cache(maxsize=None)
def load_schema(name):
    text = resources.files("cavitybec.schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(obj, name=None):
    """Validate a document against its shipped schema (``obj['schema']`` by default)."""
    name = name or obj["schema"]
    jsonschema.validate(obj, load_schema(name))
