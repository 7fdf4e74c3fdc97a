"""Differentiable primitives over :class:`Tensor`.

Every function returns a new tensor and, when any input requires gradients,
records a closure computing the input gradients from the output gradient.
Layouts: images are ``H x W x C``, point sets are ``N x C``.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import kernels
from ..errors import ConfigError, PreconditionError, ShapeError
from .tensor import Tensor, as_tensor

LEAKY_SLOPE = 0.2


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return Tensor(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data
    return Tensor(out, (a, b), lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor(out, (a, b), bw)


def leaky_relu(x, slope=None):
    slope = LEAKY_SLOPE if slope is None else slope
    x = as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope)
    return Tensor(x.data * scale, (x,), lambda g: (g * scale,))


def sigmoid(x):
    x = as_tensor(x)
    # split by sign so neither branch overflows
    z = x.data
    e = np.exp(-np.abs(z))
    s = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return Tensor(s, (x,), lambda g: (g * s * (1.0 - s),))


def softplus(x):
    x = as_tensor(x)
    z = x.data
    out = np.logaddexp(0.0, z)
    e = np.exp(-np.abs(z))
    sig = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return Tensor(out, (x,), lambda g: (g * sig,))


def absolute(x):
    x = as_tensor(x)
    return Tensor(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def total(x):
    """Sum of all entries, as a 0-d tensor."""
    x = as_tensor(x)
    return Tensor(np.sum(x.data), (x,), lambda g: (np.full(x.shape, float(g)),))


def mean(x):
    x = as_tensor(x)
    n = x.data.size
    return Tensor(np.mean(x.data), (x,), lambda g: (np.full(x.shape, float(g) / n),))


def masked_mean_abs(pred, target, mask):
    """mean over ``mask`` of |target - pred|; ``target`` and ``mask`` are constants.

    Only masked entries are read, so values under an invalid mask never
    influence the result.
    """
    pred = as_tensor(pred)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != mask.shape:
        raise ShapeError(f"mask {mask.shape} vs prediction {pred.shape}")
    count = int(mask.sum())
    if count == 0:
        return Tensor(0.0)
    t = np.asarray(target, dtype=np.float64)[mask]
    p = pred.data[mask]
    diff = p - t
    val = np.abs(diff).sum() / count

    def bw(g):
        out = np.zeros(pred.shape)
        out[mask] = float(g) * np.sign(diff) / count
        return (out,)

    return Tensor(val, (pred,), bw)


# ---------------------------------------------------------------- shape ops


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out, tensors, bw)


def reshape(x, shape):
    x = as_tensor(x)
    return Tensor(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def repeat_rows(x, times):
    """Each row repeated ``times`` times contiguously (block order)."""
    x = as_tensor(x)
    out = np.repeat(x.data, times, axis=0)

    def bw(g):
        return (g.reshape(x.shape[0], times, *x.shape[1:]).sum(axis=1),)

    return Tensor(out, (x,), bw)


def gather_rows(x, idx):
    """``x[idx]`` for a 2-D ``x`` and integer index array of any shape."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    out = x.data[idx]

    def bw(g):
        gx = np.zeros(x.shape)
        np.add.at(gx, idx.reshape(-1), g.reshape(-1, x.shape[1]))
        return (gx,)

    return Tensor(out, (x,), bw)


def gather_cells(fmap, rows, cols):
    """Feature rows ``fmap[rows[j], cols[j]]`` of an H x W x C map."""
    fmap = as_tensor(fmap)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    H, W = fmap.shape[:2]
    if rows.size and (rows.min() < 0 or rows.max() >= H or cols.min() < 0 or cols.max() >= W):
        raise PreconditionError("cell coordinate outside feature map")
    out = fmap.data[rows, cols]

    def bw(g):
        gm = np.zeros(fmap.shape)
        np.add.at(gm, (rows, cols), g)
        return (gm,)

    return Tensor(out, (fmap,), bw)


def scatter_add_cells(fmap, feats, rows, cols):
    """Copy of ``fmap`` with ``feats[j]`` added at cell ``(rows[j], cols[j])``.

    Collisions accumulate by summation in point order.
    """
    fmap, feats = as_tensor(fmap), as_tensor(feats)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if feats.shape[0] != rows.size:
        raise ShapeError(f"{feats.shape[0]} feature rows for {rows.size} coordinates")
    if feats.ndim != 2 or feats.shape[1] != fmap.shape[2]:
        raise ShapeError(f"feature width {feats.shape} does not match map {fmap.shape}")
    out = fmap.data.copy()
    np.add.at(out, (rows, cols), feats.data)
    return Tensor(out, (fmap, feats), lambda g: (g, g[rows, cols]))


def max_axis(x, axis):
    """Max along ``axis``; the gradient goes to the first maximising entry."""
    x = as_tensor(x)
    arg = np.argmax(x.data, axis=axis)
    out = np.take_along_axis(x.data, np.expand_dims(arg, axis), axis=axis).squeeze(axis)

    def bw(g):
        gx = np.zeros(x.shape)
        np.put_along_axis(gx, np.expand_dims(arg, axis), np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return Tensor(out, (x,), bw)


def upsample2x(x):
    """Nearest-neighbour 2x upsampling of an H x W x C map."""
    x = as_tensor(x)
    out = np.repeat(np.repeat(x.data, 2, axis=0), 2, axis=1)
    H, W, C = x.shape

    def bw(g):
        return (g.reshape(H, 2, W, 2, C).sum(axis=(1, 3)),)

    return Tensor(out, (x,), bw)


# ---------------------------------------------------------------- linear algebra


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul {a.shape} @ {b.shape}")
    out = a.data @ b.data
    return Tensor(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def linear(x, weight, bias=None):
    """Row-wise ``x @ W + b`` for ``x`` of shape N x C_in.

    The forward product avoids BLAS: each output row is then computed the same way
    wherever it sits, so permuting points permutes outputs bit-for-bit.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"linear: input {x.shape} vs weight {weight.shape}")
    out = np.einsum("ij,jk->ik", x.data, weight.data)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise ShapeError(f"linear: bias {bias.shape} vs output width {weight.shape[1]}")
        out = out + bias.data
        parents.append(bias)

    def bw(g):
        grads = [g @ weight.data.T, x.data.T @ g]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return tuple(grads)

    return Tensor(out, parents, bw)


def attention_weights(q, k):
    """Row-stochastic softmax(q k^T / sqrt(d)) as a plain array."""
    d = q.shape[1]
    s = np.einsum("id,jd->ij", q, k) / math.sqrt(d)
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)


def canonical_key_order(k, v):
    """Lexicographic order of the (key, value) rows.

    Reductions over keys run in this order, so the result does not depend on
    how the key set was permuted.
    """
    rows = np.concatenate([k, v], axis=1)
    return np.lexsort(rows.T[::-1])


def attention(q, k, v):
    """Single-head scaled dot-product attention, softmax(q k^T / sqrt(d)) v."""
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeError("attention expects 2-D operands")
    if k.shape[0] == 0:
        raise PreconditionError("attention over an empty key set")
    if q.shape[1] != k.shape[1] or k.shape[0] != v.shape[0] or q.shape[1] < 1:
        raise ShapeError(f"attention q{q.shape} k{k.shape} v{v.shape}")
    d = q.shape[1]
    scale = 1.0 / math.sqrt(d)
    perm = canonical_key_order(k.data, v.data)
    ks, vs = k.data[perm], v.data[perm]
    P = attention_weights(q.data, ks)
    out = np.einsum("ij,jd->id", P, vs)

    def bw(g):
        dv = np.empty_like(vs)
        dk = np.empty_like(ks)
        dv[perm] = P.T @ g
        dP = g @ vs.T
        dS = P * (dP - (dP * P).sum(axis=1, keepdims=True))
        dk[perm] = dS.T @ q.data * scale
        return dS @ ks * scale, dk, dv

    return Tensor(out, (q, k, v), bw)


# ---------------------------------------------------------------- convolutions


def _pad_amount(k, padding):
    if padding == "same":
        if k % 2 == 0:
            raise ConfigError(f"same padding needs an odd kernel, got {k}")
        return k // 2
    if padding == "valid":
        return 0
    raise ConfigError(f"unknown padding {padding!r}")


def conv2d(x, weight, bias=None, stride=1, padding="same"):
    """Cross-correlation of an H x W x C_in map with a kh x kw x C_in x C_out kernel."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 3 or weight.ndim != 4 or weight.shape[2] != x.shape[2]:
        raise ShapeError(f"conv2d input {x.shape} vs kernel {weight.shape}")
    kh, kw, ci, co = weight.shape
    ph, pw = _pad_amount(kh, padding), _pad_amount(kw, padding)
    H, W, _ = x.shape
    Hp, Wp = H + 2 * ph, W + 2 * pw
    if kh > Hp or kw > Wp:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {Hp}x{Wp}")
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    xp = np.pad(x.data, ((ph, ph), (pw, pw), (0, 0))) if (ph or pw) else x.data
    win = sliding_window_view(xp, (kh, kw), axis=(0, 1))[::stride, ::stride]
    cols = np.ascontiguousarray(win.transpose(0, 1, 3, 4, 2)).reshape(Ho * Wo, kh * kw * ci)
    wm = weight.data.reshape(kh * kw * ci, co)
    out = cols @ wm
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents.append(bias)
    out = out.reshape(Ho, Wo, co)

    def bw(g):
        g2 = g.reshape(Ho * Wo, co)
        dw = (cols.T @ g2).reshape(weight.shape)
        dx = None
        if x.requires_grad:
            dcols = (g2 @ wm.T).reshape(Ho, Wo, kh, kw, ci)
            dxp = np.zeros((Hp, Wp, ci))
            for a in range(kh):
                for b in range(kw):
                    dxp[a:a + stride * Ho:stride, b:b + stride * Wo:stride] += dcols[:, :, a, b]
            dx = dxp[ph:ph + H, pw:pw + W]
        grads = [dx, dw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    return Tensor(out, parents, bw)


def sparse_conv_numerator(x, weight, m_in, m_out):
    """Masked convolution sum, ``m_out * conv(m_in * x, weight)``, same padding.

    Masks are constants; evaluation is delegated to the kernel backend.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    k = weight.shape[0]
    if weight.shape[1] != k or k % 2 == 0:
        raise ConfigError(f"sparse conv needs a square odd kernel, got {weight.shape[:2]}")
    if weight.shape[2] != x.shape[2]:
        raise ShapeError(f"sparse conv input {x.shape} vs kernel {weight.shape}")
    m_in = np.asarray(m_in, dtype=np.uint8)
    m_out = np.asarray(m_out, dtype=np.uint8)
    out = kernels.sparse_conv_numer(x.data, m_in, m_out, weight.data)

    def bw(g):
        dx, dw = kernels.sparse_conv_numer_grad(x.data, m_in, m_out, weight.data, g)
        return dx, dw

    return Tensor(out, (x, weight), bw)


def transposed_conv1d_points(f, weight, bias=None, rate=2):
    """Fractionally strided 1-D convolution along the point axis.

    ``f`` is n x C, ``weight`` is K x C x C' with K >= rate and K - rate even.
    Output row ``p`` collects ``f[j] @ weight[t]`` for every ``p = j*rate + t - pad``
    with ``pad = (K - rate) // 2``; exactly ``rate * n`` rows are produced.
    """
    f, weight = as_tensor(f), as_tensor(weight)
    if rate < 2:
        raise ConfigError(f"upsampling rate must be >= 2, got {rate}")
    if f.ndim != 2 or f.shape[0] < 1:
        raise ShapeError(f"transposed conv needs an n x C input with n >= 1, got {f.shape}")
    K, ci, co = weight.shape
    if ci != f.shape[1]:
        raise ShapeError(f"transposed conv input width {f.shape[1]} vs kernel {weight.shape}")
    if K < rate or (K - rate) % 2:
        raise ConfigError(f"kernel length {K} incompatible with rate {rate}")
    n = f.shape[0]
    pad = (K - rate) // 2
    L = rate * n
    taps = np.einsum("nc,kcd->nkd", f.data, weight.data)  # n x K x C'
    out = np.zeros((L, co))
    spans = []
    for t in range(K):
        # rows j with 0 <= j*rate + t - pad < L
        j0 = max(0, -(-(pad - t) // rate))
        j1 = min(n, (L - 1 - t + pad) // rate + 1)
        spans.append((j0, j1))
        if j1 > j0:
            p0 = j0 * rate + t - pad
            out[p0:p0 + rate * (j1 - j0):rate] += taps[j0:j1, t]
    parents = [f, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents.append(bias)

    def bw(g):
        gt = np.zeros((n, K, co))
        for t, (j0, j1) in enumerate(spans):
            if j1 > j0:
                p0 = j0 * rate + t - pad
                gt[j0:j1, t] = g[p0:p0 + rate * (j1 - j0):rate]
        df = np.einsum("nkd,kcd->nc", gt, weight.data)
        dw = np.einsum("nc,nkd->kcd", f.data, gt)
        grads = [df, dw]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return tuple(grads)

    return Tensor(out, parents, bw)


# ---------------------------------------------------------------- point-set losses


def chamfer(a, b):
    """Two-sided mean nearest squared distance between point sets (rows)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise PreconditionError("chamfer distance of an empty point set")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"chamfer {a.shape} vs {b.shape}")
    da, ia = kernels.nearest(a.data, b.data)
    db, ib = kernels.nearest(b.data, a.data)
    na, nb = a.shape[0], b.shape[0]
    val = da.mean() + db.mean()

    def bw(g):
        g = float(g)
        ra = a.data - b.data[ia]  # a_i - nearest b
        rb = b.data - a.data[ib]  # b_j - nearest a
        ga = 2.0 * g * ra / na
        gb = 2.0 * g * rb / nb
        # each term also pulls on the matched partner
        np.add.at(gb, ia, -2.0 * g * ra / na)
        np.add.at(ga, ib, -2.0 * g * rb / nb)
        return ga, gb

    return Tensor(val, (a, b), bw)
