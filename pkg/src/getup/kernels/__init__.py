"""Hot-kernel backend, chosen once at import.

The compiled Cython module is used when it was built; otherwise the numpy
fallback. Set ``GETUP_KERNELS=python`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("GETUP_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _u8(m):
    return np.ascontiguousarray(m, dtype=np.uint8)


def sparse_conv_numer(x, m_in, m_out, w, impl=None):
    impl = impl or _impl
    return impl.sparse_conv_numer(_f64(x), _u8(m_in), _u8(m_out), _f64(w))


def sparse_conv_numer_grad(x, m_in, m_out, w, g, impl=None):
    impl = impl or _impl
    return impl.sparse_conv_numer_grad(_f64(x), _u8(m_in), _u8(m_out), _f64(w), _f64(g))


def knn(X, k, impl=None):
    impl = impl or _impl
    return impl.knn(_f64(X), int(k))


def nearest(A, B, impl=None):
    impl = impl or _impl
    return impl.nearest(_f64(A), _f64(B))


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
