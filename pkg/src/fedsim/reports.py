"""Deterministic report files.

Every report separates a canonical body (a pure function of the resolved spec
and the seeds, serialized with sorted keys) from a non-canonical envelope
(timestamps, durations). Byte-comparing canonical bodies across runs is the
reproducibility check. CSV floats are written with ``repr`` so file contents
round-trip to the exact in-memory doubles.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def canonical_dumps(body: dict) -> str:
    return json.dumps(to_jsonable(body), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def make_envelope(duration_sec: float) -> dict:
    return {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "duration_sec": duration_sec,
    }


def write_report(path: str | Path, body: dict, envelope: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"canonical": to_jsonable(body), "envelope": to_jsonable(envelope)}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_canonical_bytes(path: str | Path) -> bytes:
    """Canonical body of a written report, re-serialized for byte comparison."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return canonical_dumps(doc["canonical"]).encode("utf-8")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])
