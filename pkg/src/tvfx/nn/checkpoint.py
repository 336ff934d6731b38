"""Deterministic binary container for named float64 arrays.

Layout (all little-endian)::

    b"TVFXARR\0"  u32 format version  u32 metadata length  metadata (UTF-8 JSON)
    u32 entry count
    per entry:  u16 name length, name (UTF-8), u8 ndim, u64 * ndim dims, '<f8' data

Entries are written in sorted name order and the JSON uses sorted keys, so
identical contents always give identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TVFXARR\0"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(arrays: dict[str, np.ndarray], metadata: dict | None = None) -> bytes:
    meta = json.dumps(metadata or {}, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(meta)), meta, struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        key = name.encode()
        parts.append(struct.pack("<H", len(key)) + key + struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}Q", *a.shape))
        parts.append(a.tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a tvfx array container (bad magic)")
    pos = len(MAGIC)
    try:
        version, meta_len = struct.unpack_from("<II", blob, pos)
        if version != FORMAT_VERSION:
            raise CheckpointError(f"container format {version} is not supported (expected {FORMAT_VERSION})")
        pos += 8
        metadata = json.loads(blob[pos:pos + meta_len].decode())
        pos += meta_len
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        arrays = {}
        for _ in range(count):
            (n,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + n].decode()
            pos += n
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
            pos += 8 * ndim
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(blob, dtype="<f8", count=size, offset=pos)
            pos += 8 * size
            arrays[name] = data.reshape(shape).astype(np.float64)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"truncated or corrupt container ({exc})") from exc
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after the last entry")
    return arrays, metadata


def save(path, arrays: dict[str, np.ndarray], metadata: dict | None = None) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(arrays, metadata))
    tmp.replace(path)


def load(path) -> tuple[dict[str, np.ndarray], dict]:
    return loads(Path(path).read_bytes())
