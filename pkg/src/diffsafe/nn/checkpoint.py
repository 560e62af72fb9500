"""Versioned binary weight checkpoints with a JSON descriptor header.

Layout: magic, format version, header length, UTF-8 JSON header, then the raw
little-endian float64 array bytes in header-declared order. Loading refuses a
header whose descriptor does not match the expectation supplied by the caller.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DSWT"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, kind: str, descriptor: dict, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    names = sorted(arrays)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "descriptor": descriptor,
        "meta": meta or {},
        "arrays": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for n in names:
            f.write(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())


def load_checkpoint(
    path: str | Path,
    expect_kind: str | None = None,
    expect_descriptor: dict | None = None,
) -> tuple[dict, dict[str, np.ndarray], dict]:
    """Returns (descriptor, arrays, meta)."""
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise CheckpointError(f"truncated checkpoint: {path}")
    magic, version, header_len = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"not a weight checkpoint: {path}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    header_end = _PREFIX.size + header_len
    if len(raw) < header_end:
        raise CheckpointError(f"truncated checkpoint header: {path}")
    header = json.loads(raw[_PREFIX.size : header_end].decode("utf-8"))
    if expect_kind is not None and header["kind"] != expect_kind:
        raise CheckpointError(f"checkpoint kind {header['kind']!r} does not match expected {expect_kind!r}")
    if expect_descriptor is not None and header["descriptor"] != expect_descriptor:
        raise CheckpointError(
            f"checkpoint descriptor mismatch: {header['descriptor']} vs expected {expect_descriptor}"
        )
    arrays: dict[str, np.ndarray] = {}
    offset = header_end
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise CheckpointError(f"truncated checkpoint arrays: {path}")
        arrays[spec["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(f"trailing bytes in checkpoint: {path}")
    return header["descriptor"], arrays, header["meta"]
