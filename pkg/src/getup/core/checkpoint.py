"""Flat binary parameter checkpoints.

Layout (all integers little-endian)::

    magic    8 bytes  b"GETUPCK1"
    count    uint32   number of records
    record * count:
        name_len  uint32
        name      name_len bytes, UTF-8
        rank      uint32
        extents   rank * uint64
        data      prod(extents) * float64 (little-endian, row-major)

Records appear in parameter-store order, so identical stores give identical bytes.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

MAGIC = b"GETUPCK1"


def dumps(state) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(state))]
    for name, arr in state.items():
        arr = np.asarray(arr, dtype="<f8")  # tobytes() below emits C order
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads(buf: bytes):
    if buf[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    pos = 8
    try:
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        state = OrderedDict()
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}Q", buf, pos)
            pos += 8 * rank
            size = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(buf, dtype="<f8", count=size, offset=pos)
            pos += 8 * size
            state[name] = data.astype(np.float64).reshape(shape)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"truncated or corrupt checkpoint: {exc}") from exc
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes after last record")
    return state


def save(path, store):
    Path(path).write_bytes(dumps(store.state()))


def load(path):
    p = Path(path)
    if not p.is_file():
        raise CheckpointError(f"checkpoint not found: {p}")
    return loads(p.read_bytes())
