"""8-bit binary portable graymaps (P5)."""

from __future__ import annotations

import numpy as np

from ..errors import DataError


def depth_to_gray(depth, cap):
    """Map [0, cap] metres linearly onto 0..255; values beyond cap saturate."""
    if not cap > 0:
        raise DataError(f"cap must be positive, got {cap}")
    d = np.clip(np.asarray(depth, dtype=np.float64) / cap, 0.0, 1.0)
    return np.rint(d * 255.0).astype(np.uint8)


def write_pgm(path, gray):
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise DataError("PGM output needs a 2-D uint8 array")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(gray).tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != 255:
        raise DataError(f"{path}: only 8-bit graymaps are supported")
    body = parts[3]
    if len(body) != w * h:
        raise DataError(f"{path}: truncated pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)
