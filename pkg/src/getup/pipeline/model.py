"""The full radar-camera depth network assembled from the library blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..aggregation import FeatureAggregation
from ..ascb import N_RADAR_CHANNELS, AdaptiveSparseConvBlock
from ..core import ops
from ..core.layers import Linear
from ..core.tensor import ParameterStore, Tensor
from ..decoder import DepthDecoder, GateUnit, depth_loss, total_loss
from ..encoder2d import PyramidEncoder, select_point_features
from ..geometry import chamfer_distance
from ..gnn3d import GraphFeatureExtractor
from ..refinement import build_global_map, refine_pyramid
from ..upsampler import PointUpsampler, UpsampledCloud
from .config import RunConfig
from .frames import Frame

POINT_INPUT = 6  # normalised xyz + scaled (v_x, v_y, rcs)


@dataclass
class ForwardResult:
    depth: Tensor  # H x W
    upsampled: UpsampledCloud | None
    point_features: Tensor | None  # f_agg^G


@dataclass
class LossParts:
    total: Tensor
    depth: float
    upsample: float | None


class GetUpModel:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.store = store = ParameterStore()
        C = cfg.feature_width
        rad_c, img_c = list(cfg.radar_channels), list(cfg.image_channels)
        self.ascb = None if cfg.no_ascb else AdaptiveSparseConvBlock(
            store, "ascb", cfg.ascb_spec(), N_RADAR_CHANNELS, cfg.ascb_learnable)
        self.radar_encoder = PyramidEncoder(store, "radar_enc", N_RADAR_CHANNELS, rad_c, rng)
        self.image_encoder = PyramidEncoder(store, "image_enc", 3, img_c, rng)
        if cfg.no_gnn:
            self.gnn = self.aggregation = None
            self.point_proj = Linear(store, "point_proj", sum(rad_c), C, rng)
        else:
            self.gnn = GraphFeatureExtractor(store, "gnn", POINT_INPUT, rad_c, cfg.gnn_widths, C, cfg.k, rng,
                                             variant=cfg.gnn_variant)
            self.aggregation = FeatureAggregation(store, "agg", C, rad_c, C, rng)
            self.point_proj = None
        self.upsampler = None if cfg.no_upsample else PointUpsampler(
            store, "up", C, cfg.upsampler_config(), rng)
        self.gates = [GateUnit(store, f"gate{i + 1}", img_c[i], rad_c[i], rng) for i in range(5)]
        self.decoder = DepthDecoder(store, "dec", img_c, C, rng, cfg.decoder_widths, cfg.max_depth)

    # ------------------------------------------------------------------
    def radar_input(self, frame: Frame):
        scale = self.cfg.radar_scale()
        if self.ascb is None:
            return Tensor(frame.radar_map.features * np.asarray(scale))
        return self.ascb(frame.radar_map, scale)

    def point_input(self, frame: Frame):
        xyz = frame.transform.apply(frame.radar[:, :3])
        attrs = frame.radar[:, 3:6] * self.cfg.attr_scale
        return xyz, Tensor(np.column_stack([xyz, attrs]))

    def forward(self, frame: Frame) -> ForwardResult:
        cfg = self.cfg
        H, W = frame.shape
        rad_pyr = self.radar_encoder(self.radar_input(frame))
        img_pyr = self.image_encoder(frame.image)

        glob = up = None
        up_metric = None
        if frame.radar.shape[0]:
            f2d = select_point_features(rad_pyr, frame.coords)
            xyz, pts = self.point_input(frame)
            if self.gnn is None:
                glob = self.point_proj(ops.concat(f2d, axis=1))
            else:
                f3d = self.gnn(pts, f2d)
                agg = self.aggregation(f3d, f2d)
                rad_pyr = refine_pyramid(rad_pyr, agg.per_scale, frame.coords)
                glob = agg.global_
            if self.upsampler is not None:
                up = self.upsampler(xyz, glob)
                up_metric = frame.transform.invert(up.points.data)

        if glob is None:
            gmap = Tensor(np.zeros((H, W, cfg.feature_width)))
        else:
            gmap, _ = build_global_map(glob, frame.coords, up_metric,
                                       up.features if up is not None else None,
                                       frame.intrinsics, H, W)
        fused = [gate(fi, fr) for gate, fi, fr in zip(self.gates, img_pyr, rad_pyr)]
        return ForwardResult(self.decoder(fused, gmap), up, glob)

    def loss(self, frame: Frame, out: ForwardResult) -> LossParts:
        l_depth = depth_loss(out.depth, frame.single, frame.dense)
        l_up = None
        if out.upsampled is not None and frame.r_gt is not None:
            target = Tensor(frame.transform.apply(frame.r_gt))
            l_up = ops.chamfer(out.upsampled.points, target)
        total = total_loss(l_depth, l_up, self.cfg.alpha)
        return LossParts(total, float(l_depth.data), None if l_up is None else float(l_up.data))

    def upsample_chamfer(self, frame: Frame, out: ForwardResult):
        """Chamfer distance between R_up and R_gt in the normalised frame (None if undefined)."""
        if out.upsampled is None or frame.r_gt is None:
            return None
        return chamfer_distance(out.upsampled.points.data, frame.transform.apply(frame.r_gt))
