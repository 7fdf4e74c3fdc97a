"""Gated radar/image fusion, a coarse-to-fine depth decoder, and the training losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ops
from .core.layers import Conv2d
from .core.tensor import Tensor, as_tensor
from .errors import DataError, PreconditionError, ShapeError

MAX_DEPTH = 80.0
DECODER_WIDTHS = (64, 64, 32, 32, 16, 16)  # levels 5, 4, 3, 2, 1, 0


@dataclass
class DepthMap:
    """H x W depths in metres with an explicit validity mask."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.valid.shape:
            raise ShapeError(f"depth {self.values.shape} vs mask {self.valid.shape}")

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=np.float64)
        return cls(values, values > 0)


class GateUnit:
    """fused = F_img + sigmoid(conv_g(F_img (+) F_rad)) * conv_v(F_rad)."""

    def __init__(self, store, name, c_img, c_rad, rng):
        self.gate = Conv2d(store, f"{name}.gate", c_img + c_rad, c_img, 3, rng)
        self.value = Conv2d(store, f"{name}.value", c_rad, c_img, 1, rng)

    def gate_values(self, f_img, f_rad):
        return ops.sigmoid(self.gate(ops.concat([f_img, f_rad], axis=2)))

    def __call__(self, f_img, f_rad):
        if f_img.shape[:2] != f_rad.shape[:2]:
            raise ShapeError(f"image map {f_img.shape} vs radar map {f_rad.shape}")
        return ops.add(f_img, ops.mul(self.gate_values(f_img, f_rad), self.value(f_rad)))


def gated_fuse(unit: GateUnit, f_img, f_rad):
    return unit(f_img, f_rad)


class DepthDecoder:
    """Upsample-conv chain with a skip at every scale and a positive output head.

    ``depth = max_depth * softplus(conv1x1(x))``.
    """

    def __init__(self, store, name, img_channels, c_global, rng, widths=DECODER_WIDTHS, max_depth=MAX_DEPTH):
        if len(widths) != 6:
            raise ShapeError("decoder needs six widths (levels 5..0)")
        self.max_depth = max_depth
        c5 = img_channels[4]
        self.top = Conv2d(store, f"{name}.l5", c5, widths[0], 3, rng)
        self.ups = []
        prev = widths[0]
        for j, level in enumerate((4, 3, 2, 1)):
            w = widths[j + 1]
            self.ups.append(Conv2d(store, f"{name}.l{level}", prev + img_channels[level - 1], w, 3, rng))
            prev = w
        self.full = Conv2d(store, f"{name}.l0", prev + c_global, widths[5], 3, rng)
        self.head = Conv2d(store, f"{name}.head", widths[5], 1, 1, rng)

    def __call__(self, fused, global_map):
        if len(fused) != 5:
            raise PreconditionError("decoder needs five fused maps and the global map")
        x = ops.leaky_relu(self.top(fused[4]))
        for conv, skip in zip(self.ups, (fused[3], fused[2], fused[1], fused[0])):
            x = ops.leaky_relu(conv(ops.concat([ops.upsample2x(x), skip], axis=2)))
        x = ops.upsample2x(x)
        x = ops.leaky_relu(self.full(ops.concat([x, global_map], axis=2)))
        return self.predict_depth(x)

    def predict_depth(self, x):
        """The output head on the full-resolution decoder features: an H x W depth map."""
        d = ops.mul(ops.softplus(self.head(x)), self.max_depth)
        return ops.reshape(d, d.shape[:2])


def decode(decoder: DepthDecoder, fused, global_map):
    return decoder(fused, global_map)


def depth_loss(pred, single_scan: DepthMap, dense: DepthMap):
    """Mean |D_s - pred| over valid D_s pixels plus mean |D - pred| over valid D pixels."""
    pred = as_tensor(pred)
    if pred.shape != single_scan.values.shape or pred.shape != dense.values.shape:
        raise ShapeError(f"prediction {pred.shape} vs targets {single_scan.values.shape}/{dense.values.shape}")
    if not single_scan.valid.any() and not dense.valid.any():
        raise DataError("depth loss with no valid ground-truth pixel")
    a = ops.masked_mean_abs(pred, single_scan.values, single_scan.valid)
    b = ops.masked_mean_abs(pred, dense.values, dense.valid)
    return ops.add(a, b)


def total_loss(l_depth, l_up, alpha):
    if alpha < 0:
        raise PreconditionError(f"alpha must be >= 0, got {alpha}")
    if l_up is None:
        return as_tensor(l_depth)
    return ops.add(l_depth, ops.mul(l_up, float(alpha)))
