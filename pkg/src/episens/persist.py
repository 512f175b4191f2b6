"""Deterministic file output: CSV/JSON with embedded run metadata.

Floats are written with shortest round-trip repr and no timestamps are
recorded, so reruns with identical config and seed are byte-identical.
CSV files start with '#'-prefixed metadata comment lines (readable by
pandas via comment='#').
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import MalformedRow, MissingColumn


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def meta_lines(meta: dict) -> list[str]:
    pairs = " ".join(f"{k}={fmt(v)}" for k, v in sorted(meta.items()))
    return [f"# {pairs}"]


def write_csv(path: str | Path, header, rows, meta: dict) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for line in meta_lines(meta):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_json(path: str | Path, payload: dict, meta: dict) -> Path:
    path = Path(path)
    document = {"_meta": {k: fmt(v) if isinstance(v, float) else v for k, v in meta.items()}}
    document.update(payload)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV written by :func:`write_csv`, skipping comment lines."""
    text = Path(path).read_text()
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    reader = csv.reader(io.StringIO(body))
    rows = [row for row in reader if row]
    if not rows:
        raise MalformedRow(f"{path} has no rows")
    return rows[0], rows[1:]


def read_sample_csv(path: str | Path, output_column: str = "total_confirmed"):
    """Load a factor-sample CSV: returns (factor_names, X, y, failed)."""
    header, rows = read_csv(path)
    if output_column not in header:
        raise MissingColumn(f"{path} lacks the {output_column!r} column")
    out_idx = header.index(output_column)
    fail_idx = header.index("failed") if "failed" in header else None
    factor_idx = [
        j for j, name in enumerate(header) if j != out_idx and name != "failed"
    ]
    names = [header[j] for j in factor_idx]
    try:
        X = np.array([[float(row[j]) for j in factor_idx] for row in rows])
        y = np.array([float(row[out_idx]) if row[out_idx] != "" else np.nan for row in rows])
        failed = (
            np.array([row[fail_idx] == "1" for row in rows])
            if fail_idx is not None
            else np.zeros(len(rows), dtype=bool)
        )
    except (ValueError, IndexError) as exc:
        raise MalformedRow(f"{path}: {exc}") from exc
    return names, X, y, failed
