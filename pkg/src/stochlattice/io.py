"""Deterministic writers: RFC-4180 CSV, sorted JSON and tagged binary matrices.

Floats are written with ``repr`` so every value round-trips exactly, and no
writer records wall-clock time, so equal inputs give equal bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "write_csv",
    "read_csv",
    "write_json",
    "write_matrix",
    "read_matrix",
    "file_digest",
    "MATRIX_MAGIC",
]

MATRIX_MAGIC = b"STLMAT01"
_MATRIX_HEADER = struct.Struct("<8s32s32sQQ")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(filename: str | Path, header: list[str], rows, digests: dict | None = None) -> None:
    """Write a CSV with CRLF line ends; ``digests`` become trailing constant columns."""
    extra = sorted(digests) if digests else []
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(list(header) + extra)
    for row in rows:
        if isinstance(row, dict):
            row = [row[k] for k in header]
        w.writerow([_cell(v) for v in row] + [digests[k] for k in extra])
    Path(filename).write_bytes(buf.getvalue().encode("utf-8"))


def read_csv(filename: str | Path) -> list[dict]:
    with open(filename, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(filename: str | Path, obj) -> None:
    """Sorted-key JSON; non-finite floats are written as strings ("inf", "nan")."""
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(filename).write_bytes((text + "\n").encode("utf-8"))


def write_matrix(filename: str | Path, matrix, config_digest: str, noise_digest: str) -> None:
    """Binary matrix: magic, both digests, shape, then little-endian float64 rows."""
    m = np.ascontiguousarray(np.atleast_2d(matrix), dtype="<f8")
    head = _MATRIX_HEADER.pack(MATRIX_MAGIC, bytes.fromhex(config_digest),
                               bytes.fromhex(noise_digest), m.shape[0], m.shape[1])
    Path(filename).write_bytes(head + m.tobytes())


def read_matrix(filename: str | Path) -> tuple[np.ndarray, str, str]:
    """Return ``(matrix, config_digest, noise_digest)``."""
    data = Path(filename).read_bytes()
    if len(data) < _MATRIX_HEADER.size:
        raise ValueError(f"{filename}: truncated matrix file")
    magic, cd, nd, rows, cols = _MATRIX_HEADER.unpack_from(data)
    if magic != MATRIX_MAGIC:
        raise ValueError(f"{filename}: not a matrix file")
    body = np.frombuffer(data, dtype="<f8", offset=_MATRIX_HEADER.size)
    if body.size != rows * cols:
        raise ValueError(f"{filename}: expected {rows}x{cols} values, found {body.size}")
    return body.reshape(rows, cols).astype(float), cd.hex(), nd.hex()


def file_digest(filename: str | Path) -> str:
    return hashlib.sha256(Path(filename).read_bytes()).hexdigest()
