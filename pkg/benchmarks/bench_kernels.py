"""Time the compiled kernels against the numpy fallback on model-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from getup import kernels


def workloads(rng):
    mask = (rng.random((64, 128)) < 0.01).astype(np.uint8)
    x = rng.normal(size=(64, 128, 4)) * mask[:, :, None]
    w11 = rng.normal(size=(11, 11, 4, 4))
    m_out = (rng.random((64, 128)) < 0.3).astype(np.uint8)
    g = rng.normal(size=(64, 128, 4))
    pts = rng.normal(size=(60, 16))
    radar = rng.normal(size=(60, 3))
    lidar = rng.normal(size=(4096, 3))
    return {
        "sparse_conv 11x11 (64x128x4)": lambda impl: kernels.sparse_conv_numer(x, mask, m_out, w11, impl=impl),
        "sparse_conv grad 11x11": lambda impl: kernels.sparse_conv_numer_grad(x, mask, m_out, w11, g, impl=impl),
        "knn k=4 (60 x 16)": lambda impl: kernels.knn(pts, 4, impl=impl),
        "nearest (4096 vs 60)": lambda impl: kernels.nearest(lidar, radar, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(sorted(backends))}")
    rng = np.random.default_rng(0)
    for name, fn in workloads(rng).items():
        times = {}
        for bname, impl in sorted(backends.items()):
            fn(impl)  # warm-up
            times[bname] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        cells = "  ".join(f"{b} {t * 1e3:8.2f} ms" for b, t in times.items())
        speed = f"  x{times['python'] / times['cython']:.1f}" if "cython" in times else ""
        print(f"{name:32s} {cells}{speed}")


if __name__ == "__main__":
    main()
