"""Write point features back into the radar feature maps."""

from __future__ import annotations

import numpy as np

from .core import ops
from .core.tensor import Tensor
from .encoder2d import level_cells
from .geometry import CameraIntrinsics, project_points


def scatter_add_scale(fmap, feats, coords, level):
    """Add each point's feature to its floor-scaled cell of the level-``level`` map."""
    rows, cols = level_cells(coords, level)
    return ops.scatter_add_cells(fmap, feats, rows, cols)


def refine_pyramid(pyramid, agg_per_scale, coords):
    return [scatter_add_scale(f, a, coords, i) for i, (f, a) in enumerate(zip(pyramid, agg_per_scale), start=1)]


def build_global_map(global_feats, coords, up_points, up_feats, intrinsics: CameraIntrinsics, height, width):
    """Full-resolution map F_2d^0.

    Radar global features go to the radar pixels; upsampled features go to the
    projections of the (denormalised) upsampled points. Points behind the
    camera or off the image are discarded. Collisions sum.
    Returns ``(map, kept_upsampled_index)``.
    """
    width_c = global_feats.shape[1] if global_feats is not None else up_feats.shape[1]
    fmap = Tensor(np.zeros((height, width, width_c)))
    kept = np.zeros(0, dtype=np.int64)
    if global_feats is not None and np.shape(coords)[0]:
        coords = np.asarray(coords, dtype=np.int64)
        fmap = ops.scatter_add_cells(fmap, global_feats, coords[:, 1], coords[:, 0])
    if up_points is not None and up_feats is not None:
        proj = project_points(np.asarray(up_points), intrinsics, height, width)
        kept = proj.index
        if kept.size:
            feats = ops.gather_rows(up_feats, kept)
            fmap = ops.scatter_add_cells(fmap, feats, proj.coords[:, 1], proj.coords[:, 0])
    return fmap, kept
