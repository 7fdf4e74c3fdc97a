"""Five-scale convolutional encoders and per-point feature selection."""

from __future__ import annotations

import numpy as np

from .core import ops
from .core.layers import Conv2d
from .core.tensor import Tensor
from .errors import ConfigError, PreconditionError

N_LEVELS = 5

IMAGE_CHANNELS = (16, 32, 64, 128, 256)
RADAR_CHANNELS = (8, 16, 32, 64, 128)


class ResidualLevel:
    """Stride-2 entry conv, then two 3x3 convs with a residual add."""

    def __init__(self, store, name, c_in, c_out, rng):
        self.entry = Conv2d(store, f"{name}.entry", c_in, c_out, 3, rng, stride=2)
        self.conv1 = Conv2d(store, f"{name}.conv1", c_out, c_out, 3, rng)
        self.conv2 = Conv2d(store, f"{name}.conv2", c_out, c_out, 3, rng)

    def __call__(self, x):
        x = ops.leaky_relu(self.entry(x))
        h = ops.leaky_relu(self.conv1(x))
        h = self.conv2(h)
        return ops.leaky_relu(ops.add(x, h))


class PyramidEncoder:
    def __init__(self, store, name, c_in, channels, rng):
        if len(channels) != N_LEVELS:
            raise ConfigError(f"need {N_LEVELS} channel widths, got {list(channels)}")
        self.channels = tuple(channels)
        widths = (c_in,) + self.channels
        self.levels = [ResidualLevel(store, f"{name}.l{i + 1}", widths[i], widths[i + 1], rng)
                       for i in range(N_LEVELS)]

    def __call__(self, x):
        x = x if isinstance(x, Tensor) else Tensor(x)
        H, W = x.shape[:2]
        if H % 32 or W % 32:
            raise ConfigError(f"input extents {H}x{W} must be divisible by 32")
        out = []
        for level in self.levels:
            x = level(x)
            out.append(x)
        return out


def encode_image(encoder: PyramidEncoder, image):
    return encoder(image)


def encode_radar(encoder: PyramidEncoder, ascb_output):
    return encoder(ascb_output)


def level_cells(coords, level):
    """Floor-scaled ``(row, col)`` cells of pixel coords ``(x_2d, y_2d)`` at ``level``."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    s = 2 ** level
    return coords[:, 1] // s, coords[:, 0] // s


def select_point_features(pyramid, coords):
    """Gather each point's feature row from every pyramid level (level i at index i-1)."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    out = []
    for i, fmap in enumerate(pyramid, start=1):
        rows, cols = level_cells(coords, i)
        h, w = fmap.shape[:2]
        if coords.size and (rows.max() >= h or cols.max() >= w or coords.min() < 0):
            raise PreconditionError(f"pixel coordinate outside level-{i} map {h}x{w}")
        out.append(ops.gather_cells(fmap, rows, cols))
    return out
