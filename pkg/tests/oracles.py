"""Slow, loop-based reference implementations used as test oracles."""

import math

import numpy as np


def conv_oracle(x, w, b=None, stride=1, padding="same"):
    H, W, ci = x.shape
    kh, kw, _, co = w.shape
    ph, pw = (kh // 2, kw // 2) if padding == "same" else (0, 0)
    xp = np.zeros((H + 2 * ph, W + 2 * pw, ci))
    xp[ph:ph + H, pw:pw + W] = x
    Ho = (H + 2 * ph - kh) // stride + 1
    Wo = (W + 2 * pw - kw) // stride + 1
    out = np.zeros((Ho, Wo, co))
    for i in range(Ho):
        for j in range(Wo):
            for o in range(co):
                s = 0.0
                for a in range(kh):
                    for c in range(kw):
                        for q in range(ci):
                            s += xp[i * stride + a, j * stride + c, q] * w[a, c, q, o]
                out[i, j, o] = s + (b[o] if b is not None else 0.0)
    return out


def sparse_conv_oracle(x, mask, w, b, eps=1e-8):
    H, W, _ = x.shape
    k = w.shape[0]
    p = k // 2
    out = np.zeros((H, W, w.shape[3]))
    m_out = np.zeros((H, W), dtype=np.uint8)
    for i in range(H):
        for j in range(W):
            acc = np.zeros(w.shape[3])
            cnt = 0
            for a in range(k):
                for c in range(k):
                    y, z = i + a - p, j + c - p
                    if 0 <= y < H and 0 <= z < W and mask[y, z]:
                        acc += x[y, z] @ w[a, c]
                        cnt += 1
            if cnt:
                m_out[i, j] = 1
                out[i, j] = acc / (cnt + eps) + b
    return out, m_out


def knn_oracle(X, k):
    n = len(X)
    rows = []
    for i in range(n):
        d = [(sum((X[i][c] - X[j][c]) ** 2 for c in range(len(X[i]))), j) for j in range(n) if j != i]
        rows.append([j for _, j in sorted(d)[:k]])
    return np.array(rows, dtype=np.int64).reshape(n, k)


def chamfer_oracle(a, b):
    da = [min(float(((p - q) ** 2).sum()) for q in b) for p in a]
    db = [min(float(((p - q) ** 2).sum()) for q in a) for p in b]
    return sum(da) / len(da) + sum(db) / len(db)


def metrics_oracle(pred, gt, cap):
    sums = dict(ae=0.0, se=0.0, rel=0.0, l10=0.0, sl=0.0, d1=0, d2=0, d3=0)
    n = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if not (0 < g <= cap):
            continue
        n += 1
        sums["ae"] += abs(p - g)
        sums["se"] += (p - g) ** 2
        sums["rel"] += abs(p - g) / g
        sums["l10"] += abs(math.log10(p) - math.log10(g))
        sums["sl"] += (math.log(p) - math.log(g)) ** 2
        r = max(p / g, g / p)
        sums["d1"] += r < 1.25
        sums["d2"] += r < 1.25 ** 2
        sums["d3"] += r < 1.25 ** 3
    return [sums["ae"] / n, math.sqrt(sums["se"] / n), sums["rel"] / n, sums["l10"] / n,
            math.sqrt(sums["sl"] / n), sums["d1"] / n, sums["d2"] / n, sums["d3"] / n]
