"""Pure numpy implementations of the hot kernels.

Signatures mirror ``_ckernels.pyx`` exactly; the compiled module is preferred
when it imports. Masks are uint8 arrays of 0/1.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x, k):
    p = k // 2
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    v = sliding_window_view(xp, (k, k), axis=(0, 1))  # H, W, C, k, k
    return v.transpose(0, 1, 3, 4, 2)


def sparse_conv_numer(x, m_in, m_out, w):
    """Masked same-padding correlation sum, zeroed outside ``m_out``.

    out[y, x, o] = m_out[y, x] * sum_{a, b, i} w[a, b, i, o] * (m_in * x)[y+a-p, x+b-p, i]
    """
    H, W, ci = x.shape
    k = w.shape[0]
    xm = x * m_in[:, :, None]
    cols = _windows(xm, k).reshape(H * W, k * k * ci)
    out = (cols @ w.reshape(k * k * ci, -1)).reshape(H, W, -1)
    out *= m_out[:, :, None]
    return out


def sparse_conv_numer_grad(x, m_in, m_out, w, g):
    """Gradients of ``sparse_conv_numer`` wrt ``x`` and ``w`` given output grad ``g``."""
    H, W, ci = x.shape
    k = w.shape[0]
    co = w.shape[3]
    p = k // 2
    gm = (g * m_out[:, :, None]).reshape(H * W, co)
    xm = x * m_in[:, :, None]
    cols = _windows(xm, k).reshape(H * W, k * k * ci)
    dw = (cols.T @ gm).reshape(w.shape)
    dcols = (gm @ w.reshape(k * k * ci, co).T).reshape(H, W, k, k, ci)
    dxp = np.zeros((H + 2 * p, W + 2 * p, ci))
    for a in range(k):
        for b in range(k):
            dxp[a:a + H, b:b + W] += dcols[:, :, a, b]
    dx = dxp[p:p + H, p:p + W] * m_in[:, :, None]
    return np.ascontiguousarray(dx), dw


def _sqdist(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def knn(X, k):
    """Indices of the k nearest other rows of X; ties go to the lower index."""
    n = X.shape[0]
    d = _sqdist(X, X)
    d[np.arange(n), np.arange(n)] = np.inf
    order = np.argsort(d, axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :k].astype(np.int64))


def nearest(A, B):
    """Per-row squared distance to, and index of, the nearest row of B."""
    d = _sqdist(A, B)
    idx = np.argmin(d, axis=1)
    return d[np.arange(A.shape[0]), idx], idx.astype(np.int64)
