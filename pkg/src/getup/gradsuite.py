"""Finite-difference checks for every learnable block on small random shapes.

Each case builds its block with fresh random parameters and random inputs,
scalarises the output with fixed random weights where needed, and compares
backward() against central differences on all inputs and parameters.
"""

from __future__ import annotations

import time

import numpy as np

from .aggregation import GlobalAggregator, ScaleAggregator
from .ascb import sparse_conv_layer
from .core import ops
from .core.gradcheck import EPS, GradCheckResult, check, leaf, projected
from .core.layers import Conv2d, Linear, uniform_init
from .core.tensor import ParameterStore
from .decoder import DepthDecoder, DepthMap, GateUnit, depth_loss
from .geometry import knn
from .gnn3d import CrossAttentionStage, EdgeConvBlock
from .upsampler import UpsampleUnit


def _params(store):
    return store.values()


def case_linear(rng):
    store = ParameterStore()
    lin = Linear(store, "lin", 4, 5, rng)
    x = leaf(rng.normal(size=(6, 4)), "x")
    return lambda: projected(lin(x)), [x] + _params(store)


def case_conv2d(rng):
    store = ParameterStore()
    conv = Conv2d(store, "conv", 3, 4, 3, rng)
    x = leaf(rng.normal(size=(8, 8, 3)), "x")
    return lambda: projected(conv(x)), [x] + _params(store)


def case_conv2d_stride2(rng):
    store = ParameterStore()
    conv = Conv2d(store, "conv", 2, 3, 3, rng, stride=2)
    x = leaf(rng.normal(size=(8, 8, 2)), "x")
    return lambda: projected(conv(x)), [x] + _params(store)


def case_transposed_point_conv(rng):
    f = leaf(rng.normal(size=(5, 4)), "f")
    w = leaf(rng.normal(size=(4, 4, 3)), "weight")
    b = leaf(rng.normal(size=(3,)), "bias")
    return lambda: projected(ops.transposed_conv1d_points(f, w, b, rate=2)), [f, w, b]


def case_attention_stage(rng):
    store = ParameterStore()
    stage = CrossAttentionStage(store, "attn", 4, 6, rng)
    f3 = leaf(rng.normal(size=(7, 4)), "f3d")
    f2 = leaf(rng.normal(size=(7, 6)), "f2d")
    return lambda: projected(stage(f3, f2)), [f3, f2] + _params(store)


def case_scale_aggregation(rng):
    store = ParameterStore()
    agg = ScaleAggregator(store, "agg", 4, 5, rng)
    f3 = leaf(rng.normal(size=(6, 4)), "f3d")
    f2 = leaf(rng.normal(size=(6, 5)), "f2d")
    return lambda: projected(agg(f3, f2)), [f3, f2] + _params(store)


def case_global_aggregation(rng):
    store = ParameterStore()
    agg = GlobalAggregator(store, "agg", 4, [3, 5, 2], 6, rng)
    f3 = leaf(rng.normal(size=(5, 4)), "f3d")
    levels = [leaf(rng.normal(size=(5, c)), f"f2d_{i}") for i, c in enumerate((3, 5, 2))]
    return lambda: projected(agg(f3, levels)), [f3] + levels + _params(store)


def case_edgeconv(rng):
    # the neighbour graph is held fixed: it is a discrete choice, not a differentiable path
    store = ParameterStore()
    block = EdgeConvBlock(store, "edge", 3, 4, 3, rng)
    x = leaf(rng.normal(size=(8, 3)), "x")
    idx = knn(x.data, 3)
    return lambda: projected(block(x, idx)), [x] + _params(store)


def case_upsample_unit(rng):
    store = ParameterStore()
    unit = UpsampleUnit(store, "unit", 4, 2, 2, rng)
    pts = leaf(rng.normal(size=(4, 3)), "points")
    f = leaf(rng.normal(size=(4, 4)), "features")
    w = rng.uniform(-1, 1, size=(8, 4))
    wp = rng.uniform(-1, 1, size=(8, 3))

    def loss():
        p, g = unit(pts, f)
        return ops.add(projected(g, weights=w), projected(p, weights=wp))

    return loss, [pts, f] + _params(store)


def case_gate(rng):
    store = ParameterStore()
    gate = GateUnit(store, "gate", 3, 2, rng)
    fi = leaf(rng.normal(size=(6, 6, 3)), "f_img")
    fr = leaf(rng.normal(size=(6, 6, 2)), "f_rad")
    return lambda: projected(gate(fi, fr)), [fi, fr] + _params(store)


def case_decoder_head(rng):
    store = ParameterStore()
    dec = DepthDecoder(store, "dec", [2, 2, 2, 2, 2], 2, rng, widths=(2, 2, 2, 2, 2, 3))
    x = leaf(rng.normal(size=(16, 16, 3)), "x")
    head = [store["dec.head.weight"], store["dec.head.bias"]]
    return lambda: projected(dec.predict_depth(x), weights=np.full((16, 16), 0.01)), [x] + head


def case_decoder_chain(rng):
    """Whole decoder, outside ``CASES``: interior weights get ~1e-6 gradients
    against an O(10) loss, so their central differences sit at the float64
    round-off floor and need an absolute tolerance on top of the relative one."""
    store = ParameterStore()
    img_c = [2, 2, 3, 3, 4]
    dec = DepthDecoder(store, "dec", img_c, 2, rng, widths=(3, 3, 2, 2, 2, 2))
    fused = [leaf(rng.normal(size=(32 >> (i + 1), 32 >> (i + 1), c)), f"fused{i + 1}") for i, c in enumerate(img_c)]
    g = leaf(rng.normal(size=(32, 32, 2)), "global")
    w = rng.uniform(-1, 1, size=(32, 32)) * 0.01
    return lambda: projected(dec(fused, g), weights=w), fused[3:] + _params(store)


def case_sparse_conv(rng):
    mask = (rng.random((8, 8)) < 0.3).astype(np.uint8)
    x = leaf(rng.normal(size=(8, 8, 2)) * mask[:, :, None], "x")
    w = leaf(uniform_init(rng, (3, 3, 2, 2), 18), "weight")
    b = leaf(rng.normal(size=(2,)), "bias")
    return lambda: projected(sparse_conv_layer(x, mask, w, b)[0]), [x, w, b]


def case_depth_loss(rng):
    pred = leaf(rng.uniform(1, 20, size=(8, 8)), "pred")
    dense_v = rng.uniform(1, 20, size=(8, 8))
    dense = DepthMap(dense_v, rng.random((8, 8)) < 0.7)
    sm = rng.random((8, 8)) < 0.2
    single = DepthMap(np.where(sm, dense_v, 0.0), sm)
    return lambda: depth_loss(pred, single, dense), [pred]


def case_chamfer_loss(rng):
    a = leaf(rng.normal(size=(6, 3)), "r_up")
    b = leaf(rng.normal(size=(5, 3)), "r_gt")
    return lambda: ops.chamfer(a, b), [a, b]


CASES = {
    "linear": case_linear,
    "conv2d": case_conv2d,
    "conv2d_stride2": case_conv2d_stride2,
    "transposed_point_conv": case_transposed_point_conv,
    "attention_stage": case_attention_stage,
    "aggregation_scale": case_scale_aggregation,
    "aggregation_global": case_global_aggregation,
    "edgeconv": case_edgeconv,
    "upsample_unit": case_upsample_unit,
    "gate": case_gate,
    "decoder_head": case_decoder_head,
    "sparse_conv": case_sparse_conv,
    "depth_loss": case_depth_loss,
    "chamfer_loss": case_chamfer_loss,
}


def run_case(name, seed=0, eps=EPS, max_entries=None):
    rng = np.random.default_rng([seed, sorted(CASES).index(name)])
    loss_fn, tensors = CASES[name](rng)
    results = check(loss_fn, tensors, eps=eps, max_entries=max_entries, rng=rng)
    worst = max(results, key=lambda r: r.max_rel_error)
    return GradCheckResult(f"{name}:{worst.name}", worst.max_rel_error, sum(r.entries for r in results))


def run_suite(seed=0, eps=EPS, names=None, max_entries=None, report=None):
    """Run the named (default: all) cases; returns ``(results, seconds)``."""
    t0 = time.perf_counter()
    out = []
    for name in names or CASES:
        r = run_case(name, seed, eps, max_entries)
        out.append(r)
        if report is not None:
            report(r)
    return out, time.perf_counter() - t0
