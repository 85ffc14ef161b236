"""CSV tables and JSON run summaries with versioned schemas."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

CSV_SCHEMA_VERSION = 1
JSON_SCHEMA_VERSION = 1
PREFIX_COLUMNS = ("schema", "config_hash", "version", "op_id")


def fmt(v) -> str:
    """Deterministic text for a cell: repr-exact floats, plain ints and strings."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(columns, rows, config_hash: str, op_id: str) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(PREFIX_COLUMNS) + list(columns))
    for r in rows:
        if len(r) != len(columns):
            raise ValueError(f"row has {len(r)} cells, expected {len(columns)}")
        w.writerow([str(CSV_SCHEMA_VERSION), config_hash, __version__, op_id] + [fmt(c) for c in r])
    return buf.getvalue()


def write_csv(path: str | Path, columns, rows, config_hash: str, op_id: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(csv_text(columns, rows, config_hash, op_id))
    return p


def read_csv(path: str | Path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        r = list(csv.reader(fh))
    return r[0], r[1:]


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else fmt(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return o


def write_summary(path: str | Path, subcommand: str, config: dict, status: str, payload: dict) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": JSON_SCHEMA_VERSION, "version": __version__, "subcommand": subcommand,
           "status": status, "config": config, **payload}
    p.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return p
