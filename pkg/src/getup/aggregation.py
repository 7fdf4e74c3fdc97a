"""2-D/3-D feature aggregation by cross-attention (no residual skip)."""

from __future__ import annotations

from dataclasses import dataclass

from .core import ops
from .core.layers import Linear
from .errors import ShapeError


class ScaleAggregator:
    """f_agg = Attention(f3d W_Q, f2d W_K, f2d W_V), width of f2d."""

    def __init__(self, store, name, c3d, c2d, rng):
        self.q = Linear(store, f"{name}.q", c3d, c2d, rng)
        self.k = Linear(store, f"{name}.k", c2d, c2d, rng)
        self.v = Linear(store, f"{name}.v", c2d, c2d, rng)

    def __call__(self, f3d, f2d):
        if f3d.shape[0] != f2d.shape[0]:
            raise ShapeError(f"3-D rows {f3d.shape[0]} vs 2-D rows {f2d.shape[0]}")
        return ops.attention(self.q(f3d), self.k(f2d), self.v(f2d))


class GlobalAggregator:
    """Attention between f3d and the channel concatenation of all 2-D levels; width C."""

    def __init__(self, store, name, c3d, c2d_levels, width, rng):
        c_cat = sum(c2d_levels)
        self.c_cat = c_cat
        self.q = Linear(store, f"{name}.q", c3d, width, rng)
        self.k = Linear(store, f"{name}.k", c_cat, width, rng)
        self.v = Linear(store, f"{name}.v", c_cat, width, rng)

    def __call__(self, f3d, f2d_levels):
        rows = {f.shape[0] for f in f2d_levels} | {f3d.shape[0]}
        if len(rows) != 1:
            raise ShapeError(f"row counts disagree: {sorted(rows)}")
        f2d_g = ops.concat(f2d_levels, axis=1)
        return ops.attention(self.q(f3d), self.k(f2d_g), self.v(f2d_g))


@dataclass
class AggregatedFeatures:
    per_scale: list
    global_: object


class FeatureAggregation:
    def __init__(self, store, name, c3d, c2d_levels, width, rng):
        self.scales = [ScaleAggregator(store, f"{name}.s{i + 1}", c3d, c, rng)
                       for i, c in enumerate(c2d_levels)]
        self.global_agg = GlobalAggregator(store, f"{name}.global", c3d, c2d_levels, width, rng)

    def __call__(self, f3d, f2d_levels):
        per = [agg(f3d, f2d) for agg, f2d in zip(self.scales, f2d_levels)]
        return AggregatedFeatures(per, self.global_agg(f3d, f2d_levels))


def aggregate_per_scale(agg: ScaleAggregator, f3d, f2d):
    return agg(f3d, f2d)


def aggregate_global(agg: GlobalAggregator, f3d, f2d_levels):
    return agg(f3d, f2d_levels)
