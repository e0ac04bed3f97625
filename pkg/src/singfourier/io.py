"""Deterministic CSV/JSON output: LF line endings, '.' decimals, 17 significant digits."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np


def format_float(x) -> str:
    return f"{float(x):.17g}"


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return format_float(x)
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return str(x)


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return x if np.isfinite(x) else repr(x)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_text(path: Path, text: str) -> str:
    """Write ``text`` with LF endings and return its SHA-256."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return sha256_text(text)


def write_json(path: Path, obj) -> str:
    return write_text(path, canonical_json(obj))
