"""Attention-enhanced dynamic graph network over radar points.

Five EdgeConv blocks, each rebuilding its KNN graph in the current feature
space and each followed by cross-attention against the matching-scale 2-D
point features plus a residual skip. Stage outputs are concatenated and fused
by an MLP.
"""

from __future__ import annotations

import numpy as np

from .core import ops
from .core.layers import MLP, Linear
from .errors import ConfigError, ShapeError
from .geometry import knn_graph

GNN_WIDTHS = (16, 16, 32, 32, 64)


class EdgeConvBlock:
    """``x_i' = max_j act(MLP(x_i (+) (x_j - x_i)))`` over the k nearest neighbours.

    The single edge layer is split as ``x_i W_a + (x_j - x_i) W_b + b`` so the
    neighbour term is evaluated per node rather than per edge.
    """

    def __init__(self, store, name, c_in, c_out, k, rng):
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        self.k = k
        self.self_term = Linear(store, f"{name}.self", c_in, c_out, rng)
        self.diff_term = Linear(store, f"{name}.diff", c_in, c_out, rng, bias=False)
        self.last_graph = None
        self.last_self_loop = False

    def neighbours(self, x):
        data = x.data if hasattr(x, "data") else np.asarray(x)
        idx, _, self_loop = knn_graph(data, self.k)
        self.last_graph = idx
        self.last_self_loop = self_loop
        return idx

    def difference_branch(self, x, idx):
        """Pre-activation edge term ``(x_j - x_i) W_b``, shape N x k x C'."""
        b = self.diff_term(x)
        return ops.sub(ops.gather_rows(b, idx), ops.reshape(b, (b.shape[0], 1, b.shape[1])))

    def __call__(self, x, idx=None):
        if x.shape[0] < 1:
            raise ShapeError("edgeconv on an empty point set")
        idx = self.neighbours(x) if idx is None else idx
        a = self.self_term(x)
        edge = ops.add(ops.reshape(a, (a.shape[0], 1, a.shape[1])), self.difference_branch(x, idx))
        return ops.max_axis(ops.leaky_relu(edge), axis=1)


class CrossAttentionStage:
    """``Attention(f3 W_Q, f2 W_K, f2 W_V) + f3``; all projections land on f3's width."""

    def __init__(self, store, name, c3d, c2d, rng):
        self.q = Linear(store, f"{name}.q", c3d, c3d, rng)
        self.k = Linear(store, f"{name}.k", c2d, c3d, rng)
        self.v = Linear(store, f"{name}.v", c2d, c3d, rng)

    def __call__(self, f3d, f2d):
        if f3d.shape[0] != f2d.shape[0]:
            raise ShapeError(f"3-D rows {f3d.shape[0]} vs 2-D rows {f2d.shape[0]}")
        return ops.add(ops.attention(self.q(f3d), self.k(f2d), self.v(f2d)), f3d)


def attention_stage(stage: CrossAttentionStage, f3d, f2d):
    return stage(f3d, f2d)


def edgeconv(block: EdgeConvBlock, x):
    return block(x)


class GraphFeatureExtractor:
    """The full 3-D branch. ``variant="dgcnn"`` drops the cross-attention stages."""

    def __init__(self, store, name, c_point, c2d_levels, widths, out_width, k, rng, variant="attention"):
        if len(widths) != len(c2d_levels):
            raise ConfigError("one GNN width per 2-D feature level is required")
        if variant not in ("attention", "dgcnn"):
            raise ConfigError(f"unknown gnn variant {variant!r}")
        self.variant = variant
        self.blocks, self.stages = [], []
        c_prev = c_point
        for i, (w, c2) in enumerate(zip(widths, c2d_levels), start=1):
            self.blocks.append(EdgeConvBlock(store, f"{name}.edge{i}", c_prev, w, k, rng))
            if variant == "attention":
                self.stages.append(CrossAttentionStage(store, f"{name}.attn{i}", w, c2, rng))
            c_prev = w
        self.fusion = MLP(store, f"{name}.fusion", [sum(widths), out_width, out_width], rng)
        self.graphs = []

    def __call__(self, points, f2d_levels):
        if len(f2d_levels) != len(self.blocks):
            raise ShapeError(f"expected {len(self.blocks)} 2-D feature sets, got {len(f2d_levels)}")
        x = points
        outs = []
        self.graphs = []
        for i, block in enumerate(self.blocks):
            x = block(x)
            self.graphs.append(block.last_graph)
            if self.stages:
                x = self.stages[i](x, f2d_levels[i])
            outs.append(x)
        return self.fusion(ops.concat(outs, axis=1))


def gnn_forward(extractor: GraphFeatureExtractor, points, f2d_levels):
    return extractor(points, f2d_levels)
