"""Adaptive sparse convolution block.

Radar detections are split by depth into groups, each with its own stack of
normalised sparse convolutions; the group outputs are summed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ops
from .core.tensor import ParameterStore, Tensor
from .errors import ConfigError, ShapeError
from .geometry import CameraIntrinsics, project_points

SPARSE_EPS = 1e-8
N_RADAR_CHANNELS = 4  # depth, v_x, v_y, rcs


@dataclass
class RadarProjectionMap:
    """H x W x C_R radar attributes (channel 0 = depth in metres) and the observation mask."""

    features: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if self.features.shape[:2] != self.mask.shape:
            raise ShapeError(f"map {self.features.shape} vs mask {self.mask.shape}")

    @property
    def depth(self):
        return self.features[:, :, 0]

    @property
    def shape(self):
        return self.features.shape


def build_projection_map(radar, intrinsics: CameraIntrinsics, height, width):
    """Project N x 6 radar rows ``(x, y, z, v_x, v_y, rcs)`` onto the image grid.

    When several detections land on one pixel the nearest one is kept.
    Returns the map and the projection of the retained points.
    """
    radar = np.asarray(radar, dtype=np.float64).reshape(-1, 6)
    proj = project_points(radar[:, :3], intrinsics, height, width)
    feats = np.zeros((height, width, N_RADAR_CHANNELS))
    mask = np.zeros((height, width), dtype=np.uint8)
    if proj.index.size:
        attrs = np.column_stack([proj.depth, radar[proj.index, 3:6]])
        # farthest first, so the nearest (then lowest-index) detection is written last
        order = np.lexsort((-np.arange(proj.index.size), -proj.depth))
        for j in order:
            x, y = proj.coords[j]
            feats[y, x] = attrs[j]
            mask[y, x] = 1
    return RadarProjectionMap(feats, mask), proj


@dataclass
class DistanceGroup:
    lo: float
    hi: float
    kernels: list

    def contains(self, depth):
        return (depth >= self.lo) & (depth < self.hi)


@dataclass
class DistanceGroupSpec:
    groups: list = field(default_factory=list)

    def __post_init__(self):
        self.groups = [g if isinstance(g, DistanceGroup) else DistanceGroup(*g) for g in self.groups]
        self.validate()

    def validate(self):
        if not self.groups:
            raise ConfigError("distance group spec is empty")
        if self.groups[0].lo != 0:
            raise ConfigError("first distance interval must start at 0")
        for a, b in zip(self.groups[:-1], self.groups[1:]):
            if a.hi != b.lo:
                raise ConfigError(f"intervals not contiguous: [{a.lo},{a.hi}) then [{b.lo},{b.hi})")
        if not math.isinf(self.groups[-1].hi):
            raise ConfigError("last distance interval must be open-ended")
        for g in self.groups:
            if g.hi <= g.lo:
                raise ConfigError(f"empty interval [{g.lo}, {g.hi})")
            if not g.kernels:
                raise ConfigError("kernel schedule is empty")
            if any(k < 1 or k % 2 == 0 for k in g.kernels):
                raise ConfigError(f"kernel sizes must be odd, got {g.kernels}")
            if any(b > a for a, b in zip(g.kernels[:-1], g.kernels[1:])):
                raise ConfigError(f"kernel schedule must be non-increasing, got {g.kernels}")

    def to_list(self):
        return [[g.lo, None if math.isinf(g.hi) else g.hi, list(g.kernels)] for g in self.groups]

    @classmethod
    def from_list(cls, items):
        return cls([DistanceGroup(float(lo), math.inf if hi is None else float(hi), [int(k) for k in ks])
                    for lo, hi, ks in items])


def default_spec():
    return DistanceGroupSpec([
        DistanceGroup(0.0, 40.0, [11, 7, 7, 5, 5, 3]),
        DistanceGroup(40.0, 70.0, [11, 7, 5, 5, 3, 3]),
        DistanceGroup(70.0, math.inf, [11, 7, 5, 3]),
    ])


def conventional_spec():
    """Single-mask baseline: one group over all depths."""
    return DistanceGroupSpec([DistanceGroup(0.0, math.inf, [11, 7, 5, 3, 3])])


def partition_masks(radar_map: RadarProjectionMap, spec: DistanceGroupSpec):
    """One mask per group: observed pixels whose depth falls in the group's interval."""
    obs = radar_map.mask.astype(bool)
    d = radar_map.depth
    return [(obs & g.contains(d)).astype(np.uint8) for g in spec.groups]


def box_count(mask, k):
    """Number of set mask pixels in each k x k window (zero padding)."""
    p = k // 2
    H, W = mask.shape
    c = np.zeros((H + 2 * p + 1, W + 2 * p + 1), dtype=np.int64)
    c[1:, 1:] = np.pad(mask.astype(np.int64), p).cumsum(0).cumsum(1)
    return c[k:k + H, k:k + W] - c[:H, k:k + W] - c[k:k + H, :W] + c[:H, :W]


def sparse_conv_layer(x, mask, weight, bias=None, eps=SPARSE_EPS):
    """Normalised sparse convolution, stride 1, same padding.

    ``out = m' * (conv(mask * x, weight) / (window_count(mask) + eps) + bias)``
    with ``m'`` the k x k max-pool of ``mask``. Returns ``(out, m')``.
    """
    k = np.shape(weight)[0]
    mask = np.asarray(mask, dtype=np.uint8)
    count = box_count(mask, k)
    m_out = (count > 0).astype(np.uint8)
    numer = ops.sparse_conv_numerator(x, weight, mask, m_out)
    norm = (m_out / (count + eps))[:, :, None]
    y = ops.mul(numer, norm)
    if bias is not None:
        y = ops.add(y, ops.mul(ops.reshape(bias, (1, 1, -1)), m_out[:, :, None].astype(np.float64)))
    return y, m_out


def box_kernel(k, channels):
    w = np.zeros((k, k, channels, channels))
    for c in range(channels):
        w[:, :, c, c] = 1.0
    return w


class SparseConvPipeline:
    """Stacked sparse convolution layers following one kernel schedule."""

    def __init__(self, store: ParameterStore, name, kernels, channels, learnable=True):
        self.kernels = list(kernels)
        self.weights, self.biases = [], []
        for i, k in enumerate(self.kernels):
            w0 = box_kernel(k, channels)
            if learnable:
                self.weights.append(store.add(f"{name}.{i}.weight", w0))
                self.biases.append(store.add(f"{name}.{i}.bias", np.zeros(channels)))
            else:
                self.weights.append(Tensor(w0))
                self.biases.append(None)

    @property
    def depth(self):
        return len(self.kernels)

    def __call__(self, x, mask):
        for w, b in zip(self.weights, self.biases):
            x, mask = sparse_conv_layer(x, mask, w, b)
        return x, mask


class AdaptiveSparseConvBlock:
    def __init__(self, store, name, spec: DistanceGroupSpec, channels=N_RADAR_CHANNELS, learnable=True):
        self.spec = spec
        self.pipelines = [SparseConvPipeline(store, f"{name}.g{g}", grp.kernels, channels, learnable)
                          for g, grp in enumerate(spec.groups)]

    def group_output(self, g, radar_map: RadarProjectionMap, masks=None, scale=None):
        """Pipeline ``g`` applied to its masked copy of the (optionally rescaled) input."""
        masks = masks if masks is not None else partition_masks(radar_map, self.spec)
        m = masks[g]
        if not m.any():
            return None
        feats = radar_map.features if scale is None else radar_map.features * np.asarray(scale)
        x = Tensor(feats * m[:, :, None])
        out, _ = self.pipelines[g](x, m)
        return out

    def __call__(self, radar_map: RadarProjectionMap, scale=None):
        masks = partition_masks(radar_map, self.spec)
        total = None
        for g in range(len(self.pipelines)):
            out = self.group_output(g, radar_map, masks, scale)
            if out is None:
                # an empty group contributes exactly zero
                continue
            total = out if total is None else ops.add(total, out)
        if total is None:
            return Tensor(np.zeros(radar_map.shape))
        return total


def ascb_forward(block: AdaptiveSparseConvBlock, radar_map: RadarProjectionMap, scale=None):
    return block(radar_map, scale)
