"""Variable-ratio point-cloud upsampling.

Any number of input points is first interpolated to ``n = N_L / rate**n_units``
rows, then expanded ``rate``-fold by each upsample unit, and finally displaced
by learned per-point offsets. Works in normalised coordinates; callers
denormalise the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ops
from .core.layers import MLP, uniform_init
from .core.tensor import Tensor, as_tensor
from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class UpsamplerConfig:
    n_points: int = 128  # N_L
    rate: int = 2  # tau
    n_units: int = 2
    kernel_size: int | None = None  # transposed-conv length; defaults to ``rate``
    sort_by_depth: bool = False

    def __post_init__(self):
        for key in ("n_points", "rate", "n_units"):
            if int(getattr(self, key)) < 1:
                raise ConfigError(f"{key} must be a positive integer")
        if self.rate < 2:
            raise ConfigError(f"upsampling rate must be >= 2, got {self.rate}")
        if self.n_points % (self.rate ** self.n_units):
            raise ConfigError(
                f"N_L={self.n_points} not divisible by rate**n_units={self.rate ** self.n_units}")
        k = self.tconv_kernel
        if k < self.rate or (k - self.rate) % 2:
            raise ConfigError(f"transposed-conv kernel {k} incompatible with rate {self.rate}")

    @property
    def base_points(self):
        return self.n_points // self.rate ** self.n_units

    @property
    def tconv_kernel(self):
        return self.rate if self.kernel_size is None else int(self.kernel_size)


def interpolation_plan(n_in, n_out):
    """Lower index, upper index and weight of the upper sample for each output row.

    Output row ``i`` sits at position ``i * (n_in - 1) / (n_out - 1)`` on the input index axis.
    """
    if n_in < 1:
        raise ShapeError("reshape of an empty point set")
    if n_out == 1 or n_in == 1:
        pos = np.zeros(n_out)
    else:
        pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.floor(pos).astype(np.int64)
    lo = np.minimum(lo, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def reshape_block(points, features, n):
    """Linearly interpolate point rows and feature rows to exactly ``n`` rows."""
    points, features = as_tensor(points), as_tensor(features)
    if points.shape[0] != features.shape[0]:
        raise ShapeError(f"{points.shape[0]} points vs {features.shape[0]} feature rows")
    lo, hi, frac = interpolation_plan(points.shape[0], n)
    w_hi = frac[:, None]
    w_lo = 1.0 - w_hi

    def lerp(x):
        return ops.add(ops.mul(ops.gather_rows(x, lo), w_lo), ops.mul(ops.gather_rows(x, hi), w_hi))

    return lerp(points), lerp(features)


class UpsampleUnit:
    """Duplicate branch + transposed-conv branch, concatenated and refined by two layers."""

    def __init__(self, store, name, width, rate, kernel_size, rng):
        self.rate = rate
        k = kernel_size
        self.tconv_w = store.add(f"{name}.tconv.weight", uniform_init(rng, (k, width, width), width))
        self.tconv_b = store.add(f"{name}.tconv.bias", uniform_init(rng, (width,), width))
        self.refine = MLP(store, f"{name}.refine", [2 * width, width, width], rng, final_act=True)

    def __call__(self, points, features):
        if features.shape[0] < 1:
            raise ShapeError("upsample unit needs at least one point")
        dup = ops.repeat_rows(features, self.rate)
        tc = ops.transposed_conv1d_points(features, self.tconv_w, self.tconv_b, self.rate)
        feats = self.refine(ops.concat([dup, tc], axis=1))
        return ops.repeat_rows(points, self.rate), feats


def upsample_unit(unit: UpsampleUnit, points, features):
    return unit(points, features)


@dataclass
class UpsampledCloud:
    points: Tensor  # R_up, N_L x 3
    features: Tensor  # F_up, N_L x C
    offsets: Tensor  # delta r, N_L x 3
    base: np.ndarray  # R_up', N_L x 3


class CoordinateReconstruction:
    def __init__(self, store, name, width, rng, zero_last=False):
        self.mlp1 = MLP(store, f"{name}.mlp1", [width, max(width // 2, 1)], rng, final_act=True)
        self.mlp2 = MLP(store, f"{name}.mlp2", [max(width // 2, 1), 3], rng, zero_last=zero_last)

    def __call__(self, features, base_points):
        features = as_tensor(features)
        base = np.asarray(base_points.data if isinstance(base_points, Tensor) else base_points)
        if features.shape[0] != base.shape[0]:
            raise ShapeError(f"{features.shape[0]} feature rows vs {base.shape[0]} base points")
        offsets = self.mlp2(self.mlp1(features))
        pts = ops.add(Tensor(base), offsets)
        return UpsampledCloud(pts, features, offsets, base)


def reconstruct_coordinates(head: CoordinateReconstruction, features, base_points):
    return head(features, base_points)


class PointUpsampler:
    def __init__(self, store, name, width, config: UpsamplerConfig, rng):
        self.config = config
        self.units = [UpsampleUnit(store, f"{name}.unit{i + 1}", width, config.rate, config.tconv_kernel, rng)
                      for i in range(config.n_units)]
        self.head = CoordinateReconstruction(store, f"{name}.recon", width, rng)

    def __call__(self, points, features):
        pts = np.asarray(points.data if isinstance(points, Tensor) else points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ShapeError(f"expected N x 3 points, got {pts.shape}")
        features = as_tensor(features)
        if self.config.sort_by_depth:
            order = np.argsort(pts[:, 2], kind="stable")
            pts = pts[order]
            features = ops.gather_rows(features, order)
        p, f = reshape_block(Tensor(pts), features, self.config.base_points)
        for unit in self.units:
            p, f = unit(p, f)
        if p.shape[0] != self.config.n_points:
            raise ShapeError(f"internal: produced {p.shape[0]} points, expected {self.config.n_points}")
        return self.head(f, p.data)


def upsample(upsampler: PointUpsampler, points, features):
    return upsampler(points, features)


def replicate_of_reshape(points, config: UpsamplerConfig):
    """The offset-free baseline: interpolate to ``n`` rows, then repeat each row rate**n_units times."""
    pts = np.asarray(points, dtype=np.float64)
    if config.sort_by_depth:
        pts = pts[np.argsort(pts[:, 2], kind="stable")]
    lo, hi, frac = interpolation_plan(pts.shape[0], config.base_points)
    base = pts[lo] * (1.0 - frac)[:, None] + pts[hi] * frac[:, None]
    return np.repeat(base, config.rate ** config.n_units, axis=0)
