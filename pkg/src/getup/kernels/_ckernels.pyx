# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ``_pykernels``.

The sparse convolution loops visit only active output sites and skip
unobserved inputs, which is where the dense formulation wastes most work.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def sparse_conv_numer(const double[:, :, ::1] x, const unsigned char[:, ::1] m_in,
                      const unsigned char[:, ::1] m_out, const double[:, :, :, ::1] w):
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1], ci = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], co = w.shape[3], p = k // 2
    cdef Py_ssize_t y, xx, a, b, yi, xi, i, o
    cdef double v
    out_arr = np.zeros((H, W, co), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for y in range(H):
            for xx in range(W):
                if m_out[y, xx] == 0:
                    continue
                for a in range(k):
                    yi = y + a - p
                    if yi < 0 or yi >= H:
                        continue
                    for b in range(k):
                        xi = xx + b - p
                        if xi < 0 or xi >= W or m_in[yi, xi] == 0:
                            continue
                        for i in range(ci):
                            v = x[yi, xi, i]
                            for o in range(co):
                                out[y, xx, o] += w[a, b, i, o] * v
    return out_arr


def sparse_conv_numer_grad(const double[:, :, ::1] x, const unsigned char[:, ::1] m_in,
                           const unsigned char[:, ::1] m_out, const double[:, :, :, ::1] w,
                           const double[:, :, ::1] g):
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1], ci = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], co = w.shape[3], p = k // 2
    cdef Py_ssize_t y, xx, a, b, yi, xi, i, o
    cdef double v, acc
    dx_arr = np.zeros((H, W, ci), dtype=np.float64)
    dw_arr = np.zeros((k, k, ci, co), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    with nogil:
        for y in range(H):
            for xx in range(W):
                if m_out[y, xx] == 0:
                    continue
                for a in range(k):
                    yi = y + a - p
                    if yi < 0 or yi >= H:
                        continue
                    for b in range(k):
                        xi = xx + b - p
                        if xi < 0 or xi >= W or m_in[yi, xi] == 0:
                            continue
                        for i in range(ci):
                            v = x[yi, xi, i]
                            acc = 0.0
                            for o in range(co):
                                dw[a, b, i, o] += v * g[y, xx, o]
                                acc = acc + w[a, b, i, o] * g[y, xx, o]
                            dx[yi, xi, i] += acc
    return dx_arr, dw_arr


def knn(const double[:, ::1] X, Py_ssize_t k):
    cdef Py_ssize_t n = X.shape[0], c = X.shape[1]
    cdef Py_ssize_t i, j, t, s
    cdef double d, diff
    out_arr = np.empty((n, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    best_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] best = best_arr
    with nogil:
        for i in range(n):
            for t in range(k):
                best[t] = INFINITY
                out[i, t] = -1
            for j in range(n):
                if j == i:
                    continue
                d = 0.0
                for s in range(c):
                    diff = X[i, s] - X[j, s]
                    d = d + diff * diff
                # strict < keeps the earlier (lower) index on ties
                if d < best[k - 1] or out[i, k - 1] == -1:
                    t = k - 1
                    while t > 0 and (out[i, t - 1] == -1 or d < best[t - 1]):
                        best[t] = best[t - 1]
                        out[i, t] = out[i, t - 1]
                        t -= 1
                    best[t] = d
                    out[i, t] = j
    return out_arr


def nearest(const double[:, ::1] A, const double[:, ::1] B):
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], c = A.shape[1]
    cdef Py_ssize_t i, j, s, bi
    cdef double d, diff, bd
    dist_arr = np.empty(n, dtype=np.float64)
    idx_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] dist = dist_arr
    cdef cnp.int64_t[::1] idx = idx_arr
    with nogil:
        for i in range(n):
            bd = INFINITY
            bi = 0
            for j in range(m):
                d = 0.0
                for s in range(c):
                    diff = A[i, s] - B[j, s]
                    d = d + diff * diff
                if d < bd:
                    bd = d
                    bi = j
            dist[i] = bd
            idx[i] = bi
    return dist_arr, idx_arr
