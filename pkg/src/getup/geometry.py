"""Camera projection, neighbour queries, Chamfer distance and point-cloud normalisation.

Conventions
-----------
Camera frame: x right, y down, z forward (depth). Pixel coordinates are
``(x_2d, y_2d) = (column, row)`` with the origin at the top-left corner and
are obtained by flooring the continuous pinhole projection. Back-projection
places a point at the pixel centre ``(u + 0.5, v + 0.5)``, which re-projects to
the same integer pixel. All ties break toward the lower index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DataError, PreconditionError


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DataError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def scaled(self, dx=0.0, dy=0.0):
        """Intrinsics of a crop whose top-left corner sits at pixel (dx, dy)."""
        return CameraIntrinsics(self.fx, self.fy, self.cx - dx, self.cy - dy)


class Projection(NamedTuple):
    coords: np.ndarray  # M x 2 int64, (x_2d, y_2d)
    depth: np.ndarray  # M
    index: np.ndarray  # M indices into the input cloud


def project_points(points, intrinsics: CameraIntrinsics, height, width) -> Projection:
    """Pinhole projection; drops points behind the camera or outside the image."""
    if height <= 0 or width <= 0:
        raise PreconditionError(f"image extents must be positive, got {height}x{width}")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.size == 0:
        return Projection(np.zeros((0, 2), np.int64), np.zeros(0), np.zeros(0, np.int64))
    z = pts[:, 2]
    front = z > 0
    zs = np.where(front, z, 1.0)
    u = intrinsics.fx * pts[:, 0] / zs + intrinsics.cx
    v = intrinsics.fy * pts[:, 1] / zs + intrinsics.cy
    ui = np.floor(u)
    vi = np.floor(v)
    keep = front & (ui >= 0) & (ui < width) & (vi >= 0) & (vi < height)
    idx = np.nonzero(keep)[0].astype(np.int64)
    coords = np.stack([ui[idx], vi[idx]], axis=1).astype(np.int64)
    return Projection(coords, z[idx].copy(), idx)


def back_project(coords, depth, intrinsics: CameraIntrinsics):
    """3-D points at the centres of integer pixels ``coords`` with the given depths."""
    coords = np.asarray(coords, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    x = (coords[:, 0] + 0.5 - intrinsics.cx) * depth / intrinsics.fx
    y = (coords[:, 1] + 0.5 - intrinsics.cy) * depth / intrinsics.fy
    return np.stack([x, y, depth], axis=1)


def knn(points, k):
    """Indices (N x k) of each row's k nearest other rows by Euclidean distance."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    if n <= k:
        raise PreconditionError(f"knn needs more than k={k} points, got {n}")
    return kernels.knn(pts, k)


def knn_graph(points, k):
    """Neighbour indices with the sparse-frame fallback.

    Returns ``(indices, k_used, self_loop)``. With N <= k every other point is a
    neighbour (k' = N - 1); a single point is its own neighbour.
    """
    n = np.shape(points)[0]
    if n <= 1:
        return np.zeros((n, 1), dtype=np.int64), 1, True
    k_used = min(k, n - 1)
    return knn(points, k_used), k_used, False


def chamfer_distance(a, b) -> float:
    """Mean nearest squared distance from a to b plus from b to a."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise PreconditionError("chamfer distance of an empty point set")
    da, _ = kernels.nearest(a, b)
    db, _ = kernels.nearest(b, a)
    return float(da.mean() + db.mean())


def select_gt_points(radar_xyz, lidar_xyz, n_l, return_index=False):
    """The ``n_l`` LiDAR points closest (squared distance) to any radar point.

    Points come back in ascending distance, equal distances in index order.
    """
    radar = np.asarray(radar_xyz, dtype=np.float64)[:, :3]
    lidar = np.asarray(lidar_xyz, dtype=np.float64)[:, :3]
    if radar.shape[0] == 0:
        raise PreconditionError("ground-truth selection needs at least one radar point")
    if lidar.shape[0] < n_l:
        raise DataError(f"LiDAR cloud has {lidar.shape[0]} points, fewer than N_L={n_l}")
    dist, _ = kernels.nearest(lidar, radar)
    order = np.argsort(dist, kind="stable")[:n_l]
    if return_index:
        return lidar[order], order
    return lidar[order]


@dataclass(frozen=True)
class NormalizationTransform:
    centroid: np.ndarray
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DataError(f"normalisation scale must be positive, got {self.scale}")

    def apply(self, cloud):
        cloud = np.asarray(cloud, dtype=np.float64)
        return (cloud[:, :3] - self.centroid) / self.scale

    def invert(self, cloud):
        cloud = np.asarray(cloud, dtype=np.float64)
        return cloud[:, :3] * self.scale + self.centroid


def normalize(cloud):
    """Centre on the centroid and divide by the largest distance to it."""
    pts = np.asarray(cloud, dtype=np.float64)[:, :3]
    if pts.shape[0] == 0:
        raise PreconditionError("cannot normalise an empty cloud")
    centroid = pts.mean(axis=0)
    scale = float(np.sqrt(((pts - centroid) ** 2).sum(axis=1)).max())
    if not scale > 0:
        raise DataError("degenerate cloud: all points coincide")
    tf = NormalizationTransform(centroid, scale)
    return tf.apply(pts), tf


def denormalize(cloud, transform: NormalizationTransform):
    return transform.invert(cloud)


def nearest_depth_discrepancy(radar_coords, radar_depth, lidar_coords, lidar_depth):
    """|depth_radar - depth_lidar| against the nearest LiDAR pixel on the image plane."""
    rc = np.asarray(radar_coords, dtype=np.float64).reshape(-1, 2)
    lc = np.asarray(lidar_coords, dtype=np.float64).reshape(-1, 2)
    if lc.shape[0] == 0:
        raise PreconditionError("no LiDAR pixels to compare against")
    if rc.shape[0] == 0:
        return np.zeros(0)
    _, idx = kernels.nearest(rc, lc)
    return np.abs(np.asarray(radar_depth, dtype=np.float64) - np.asarray(lidar_depth, dtype=np.float64)[idx])
