"""Radar-versus-LiDAR depth discrepancy histograms."""

from __future__ import annotations

import csv

import numpy as np

from ..errors import DataError
from ..geometry import nearest_depth_discrepancy, project_points
from .scene import Scene

BIN_WIDTH = 0.5
BIN_LIMIT = 20.0
N_BINS = int(BIN_LIMIT / BIN_WIDTH) + 1  # the last bin collects everything >= BIN_LIMIT


def _image_plane(points, intr):
    """Floored pinhole coordinates without the image-bounds cut (every radar point is counted)."""
    z = points[:, 2]
    u = np.floor(intr.fx * points[:, 0] / z + intr.cx)
    v = np.floor(intr.fy * points[:, 1] / z + intr.cy)
    return np.column_stack([u, v]), z


def scene_discrepancies(scene: Scene):
    H, W = scene.shape
    radar = scene.radar[:, :3]
    if np.any(radar[:, 2] <= 0):
        raise DataError("radar detection behind the camera")
    rc, rd = _image_plane(radar, scene.intrinsics)
    lp = project_points(scene.lidar, scene.intrinsics, H, W)
    return nearest_depth_discrepancy(rc, rd, lp.coords, lp.depth)


def bin_counts(values):
    values = np.asarray(values, dtype=np.float64)
    idx = np.minimum(np.floor(values / BIN_WIDTH), N_BINS - 1).astype(np.int64)
    return np.bincount(idx, minlength=N_BINS)


def dataset_histogram(scenes):
    if not scenes:
        raise DataError("histogram of an empty dataset")
    counts = np.zeros(N_BINS, dtype=np.int64)
    for s in scenes:
        counts += bin_counts(scene_discrepancies(s))
    return counts


def bin_edges():
    lo = np.arange(N_BINS) * BIN_WIDTH
    hi = lo + BIN_WIDTH
    hi[-1] = np.inf
    return lo, hi


def write_histogram(path, counts):
    lo, hi = bin_edges()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for a, b, c in zip(lo, hi, counts):
            w.writerow([repr(float(a)), "inf" if np.isinf(b) else repr(float(b)), int(c)])


def mass_beyond(counts, metres):
    """Fraction of detections whose bin lies entirely at or beyond ``metres``."""
    lo, _ = bin_edges()
    counts = np.asarray(counts)
    total = counts.sum()
    return float(counts[lo >= metres].sum() / total) if total else 0.0
