"""Turn a stored scene into the tensors one forward pass consumes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ascb import RadarProjectionMap, build_projection_map
from ..decoder import DepthMap
from ..errors import DataError
from ..geometry import CameraIntrinsics, NormalizationTransform, project_points, select_gt_points
from .config import RunConfig
from .scene import Scene


@dataclass
class Frame:
    image: np.ndarray  # h x w x 3
    intrinsics: CameraIntrinsics
    radar: np.ndarray  # in-view detections, N x 6
    coords: np.ndarray  # N x 2 pixel coordinates of ``radar``
    radar_map: RadarProjectionMap
    dense: DepthMap  # D
    single: DepthMap  # D_s
    eval_gt: np.ndarray  # LiDAR-projected sparse depth, 0 where absent
    r_gt: np.ndarray | None  # N_L LiDAR points nearest the radar (metric), None without radar
    transform: NormalizationTransform | None

    @property
    def shape(self):
        return self.dense.values.shape


def single_scan_mask(scene: Scene, fraction):
    """A fixed per-scene sample of ``fraction`` of the valid dense pixels."""
    valid = np.flatnonzero(scene.depth.ravel() > 0)
    n = max(1, int(round(fraction * valid.size)))
    rng = np.random.default_rng([scene.seed, 0x5D])
    pick = np.sort(rng.choice(valid, size=min(n, valid.size), replace=False))
    mask = np.zeros(scene.depth.size, dtype=bool)
    mask[pick] = True
    return mask.reshape(scene.depth.shape)


def safe_transform(xyz):
    """Centroid / max-radius normalisation; unit scale when the points coincide."""
    centroid = xyz.mean(axis=0)
    scale = float(np.sqrt(((xyz - centroid) ** 2).sum(axis=1)).max())
    return NormalizationTransform(centroid, scale if scale > 0 else 1.0)


def flip_scene(scene: Scene) -> Scene:
    """Mirror about the vertical image axis: x -> -x, v_x -> -v_x, cx -> W - cx."""
    H, W = scene.shape
    i = scene.intrinsics
    lidar = scene.lidar.copy()
    lidar[:, 0] *= -1
    radar = scene.radar.copy()
    radar[:, 0] *= -1
    radar[:, 3] *= -1
    return Scene(scene.image[:, ::-1].copy(), scene.depth[:, ::-1].copy(), lidar, radar,
                 CameraIntrinsics(i.fx, i.fy, W - i.cx, i.cy), scene.seed)


def prepare_frame(scene: Scene, cfg: RunConfig, rng=None, single_mask=None) -> Frame:
    """Crop (random when ``rng`` is given, centred otherwise), optionally flip, build targets."""
    H, W = scene.shape
    h, w = cfg.height, cfg.width
    if H < h or W < w:
        raise DataError(f"scene {H}x{W} smaller than crop {h}x{w}")
    if single_mask is None:
        single_mask = single_scan_mask(scene, cfg.ds_fraction)
    if rng is not None:
        y0 = int(rng.integers(0, H - h + 1))
        x0 = int(rng.integers(0, W - w + 1))
        flip = cfg.augment_flip and bool(rng.integers(0, 2))
    else:
        y0, x0, flip = (H - h) // 2, (W - w) // 2, False
    if flip:
        scene = flip_scene(scene)
        single_mask = single_mask[:, ::-1]
        x0 = W - w - x0
    intr = scene.intrinsics.scaled(x0, y0)
    depth = scene.depth[y0:y0 + h, x0:x0 + w]
    image = scene.image[y0:y0 + h, x0:x0 + w]
    sm = single_mask[y0:y0 + h, x0:x0 + w]

    dense = DepthMap(depth, depth > 0)
    single = DepthMap(np.where(sm, depth, 0.0), sm & (depth > 0))

    lp = project_points(scene.lidar, intr, h, w)
    eval_gt = np.zeros((h, w))
    eval_gt[lp.coords[:, 1], lp.coords[:, 0]] = lp.depth

    radar_map, proj = build_projection_map(scene.radar, intr, h, w)
    radar = scene.radar[proj.index]
    r_gt, tf = None, None
    if radar.shape[0]:
        tf = safe_transform(radar[:, :3])
        lidar_in_view = scene.lidar[lp.index]
        if lidar_in_view.shape[0] >= cfg.n_points:
            r_gt = select_gt_points(radar[:, :3], lidar_in_view, cfg.n_points)
    return Frame(np.ascontiguousarray(image), intr, radar, proj.coords, radar_map,
                 dense, single, eval_gt, r_gt, tf)
