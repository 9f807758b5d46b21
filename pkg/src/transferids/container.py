"""Versioned plain-text container used to persist datasets, models and batches.

Layout::

    TRANSFERIDS-CONTAINER 1
    {"kind": "...", ...}            <- one line of JSON metadata
    @array <name> <dtype> <d0,d1,...>
    <row-major values, one row per line, space separated>
    @end

Floats are written with ``repr`` so that a write/read cycle is bit exact.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

MAGIC = "TRANSFERIDS-CONTAINER"
VERSION = 1


class ContainerError(ValueError):
    """Raised for malformed files or version/kind mismatches."""


def _format_row(row: np.ndarray) -> str:
    if row.dtype.kind == "f":
        return " ".join(repr(float(v)) for v in row)
    return " ".join(str(int(v)) for v in row)


def dumps(kind: str, meta: dict[str, Any], arrays: dict[str, np.ndarray]) -> str:
    header = dict(meta)
    header["kind"] = kind
    lines = [f"{MAGIC} {VERSION}", json.dumps(header, sort_keys=True)]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if arr.dtype.kind not in "fiub":
            raise ContainerError(f"array {name!r} has unsupported dtype {arr.dtype}")
        dtype = "float64" if arr.dtype.kind == "f" else "int64"
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(f"@array {name} {dtype} {shape}")
        if arr.ndim == 0:
            lines.append(_format_row(arr.reshape(1)))
        elif arr.size:
            for row in arr.reshape(arr.shape[0], -1):
                lines.append(_format_row(row))
        lines.append("@end")
    return "\n".join(lines) + "\n"


def loads(text: str, kind: str | None = None) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    lines = text.splitlines()
    if len(lines) < 2:
        raise ContainerError("truncated container")
    parts = lines[0].split()
    if len(parts) != 2 or parts[0] != MAGIC:
        raise ContainerError("not a transferids container")
    if parts[1] != str(VERSION):
        raise ContainerError(f"container version {parts[1]} is not supported (expected {VERSION})")
    meta = json.loads(lines[1])
    if kind is not None and meta.get("kind") != kind:
        raise ContainerError(f"expected a {kind!r} container, found {meta.get('kind')!r}")

    arrays: dict[str, np.ndarray] = {}
    i = 2
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        tok = line.split()
        if tok[0] != "@array" or len(tok) not in (3, 4):
            raise ContainerError(f"line {i + 1}: expected '@array', got {line[:40]!r}")
        name, dtype = tok[1], tok[2]
        shape = tuple(int(s) for s in tok[3].split(",")) if len(tok) == 4 else ()
        i += 1
        rows = []
        while i < len(lines) and lines[i] != "@end":
            rows.append(lines[i])
            i += 1
        if i >= len(lines):
            raise ContainerError(f"array {name!r} is missing '@end'")
        i += 1
        np_dtype = np.float64 if dtype == "float64" else np.int64
        size = int(np.prod(shape)) if shape else 1
        if size == 0:
            arrays[name] = np.zeros(shape, dtype=np_dtype)
            continue
        flat = " ".join(rows).split()
        if len(flat) != size:
            raise ContainerError(f"array {name!r}: expected {size} values, found {len(flat)}")
        if np_dtype is np.float64:
            values = np.array([float(v) for v in flat], dtype=np.float64)
        else:
            values = np.array([int(v) for v in flat], dtype=np.int64)
        arrays[name] = values.reshape(shape)
    return meta, arrays


def save(path: str | Path, kind: str, meta: dict[str, Any], arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_text(dumps(kind, meta, arrays))


def load(path: str | Path, kind: str | None = None) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    return loads(Path(path).read_text(), kind=kind)


def fingerprint(*parts: Any) -> str:
    """Short stable hash of arrays and JSON-able values."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            arr = np.ascontiguousarray(part)
            h.update(str(arr.dtype).encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        else:
            h.update(json.dumps(part, sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]
