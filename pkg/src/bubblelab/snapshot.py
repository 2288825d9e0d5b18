"""Raw little-endian float64 field snapshots with a JSON sidecar.

``field.bin`` holds the ``n x n x 3`` array in row-major order with the vector
component varying fastest; ``field.meta.json`` describes it and carries a
SHA-256 of the binary so that truncation or bit rot is detected on read.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

DTYPE = "float64-little-endian"
LAYOUT = "row-major, component-fastest"
BIN_NAME = "field.bin"
META_NAME = "field.meta.json"


class SnapshotError(ValueError):
    pass


class DimensionMismatchError(SnapshotError):
    pass


class ChecksumMismatchError(SnapshotError):
    pass


def write_snapshot(u: np.ndarray, directory, extra: dict | None = None) -> Path:
    u = np.asarray(u)
    if u.ndim != 3 or u.shape[0] != u.shape[1] or u.shape[2] != 3:
        raise DimensionMismatchError(f"expected an (n, n, 3) field, got {u.shape}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(u, dtype="<f8").tobytes()
    (directory / BIN_NAME).write_bytes(data)
    meta = {
        "n": int(u.shape[0]),
        "components": 3,
        "dtype": DTYPE,
        "layout": LAYOUT,
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    if extra:
        meta["extra"] = extra
    (directory / META_NAME).write_text(json.dumps(meta, indent=2) + "\n")
    return directory


def read_snapshot(directory) -> tuple[np.ndarray, dict]:
    directory = Path(directory)
    try:
        meta = json.loads((directory / META_NAME).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"unreadable snapshot metadata in {directory}: {exc}") from exc
    if meta.get("dtype") != DTYPE or meta.get("layout") != LAYOUT:
        raise SnapshotError(f"unsupported dtype/layout {meta.get('dtype')!r}, {meta.get('layout')!r}")
    n, c = meta.get("n"), meta.get("components")
    if not isinstance(n, int) or n <= 0 or c != 3:
        raise DimensionMismatchError(f"bad dimensions in metadata: n={n!r}, components={c!r}")
    data = (directory / BIN_NAME).read_bytes()
    if len(data) != n * n * 3 * 8:
        raise DimensionMismatchError(f"{BIN_NAME} has {len(data)} bytes, metadata implies {n * n * 3 * 8}")
    if "sha256" in meta and hashlib.sha256(data).hexdigest() != meta["sha256"]:
        raise ChecksumMismatchError(f"{BIN_NAME} does not match its recorded checksum")
    u = np.frombuffer(data, dtype="<f8").reshape(n, n, 3).astype(float)
    return u, meta
