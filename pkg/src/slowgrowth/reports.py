"""Deterministic report serialization: JSON documents with sorted keys plus CSV tables."""
from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np


def _clean(obj):
    """Convert numpy scalars and arrays to JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def write_report(out_dir: str | os.PathLike, name: str, doc: dict, tables: dict | None = None) -> Path:
    """Write ``name.json`` and one ``name.<table>.csv`` per entry of ``tables``; returns the JSON path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.json"
    path.write_text(dumps(doc))
    for key, text in sorted((tables or {}).items()):
        (out / f"{name}.{key}.csv").write_text(text)
    return path


def csv_table(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"
