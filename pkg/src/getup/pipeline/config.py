"""Run configuration: every knob of a training or evaluation run in one record."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from ..ascb import DistanceGroupSpec, conventional_spec, default_spec
from ..decoder import DECODER_WIDTHS, MAX_DEPTH
from ..encoder2d import IMAGE_CHANNELS, RADAR_CHANNELS
from ..errors import ConfigError
from ..gnn3d import GNN_WIDTHS
from ..upsampler import UpsamplerConfig

FULL_CROP = (352, 704)
DESK_CROP = (64, 128)
ABLATION_FLAGS = ("no_ascb", "conventional_sparse", "no_gnn", "no_upsample")


@dataclass
class RunConfig:
    # data and optimisation
    height: int = DESK_CROP[0]
    width: int = DESK_CROP[1]
    lr: float = 1e-4
    lr_power: float = 0.9
    batch_size: int = 6
    iterations: int = 200
    alpha: float = 1.0
    seed: int = 0
    ds_fraction: float = 0.02
    augment_flip: bool = True
    # point branch
    k: int = 4
    n_points: int = 128
    rate: int = 2
    n_units: int = 2
    tconv_kernel: int = 0  # 0 means "same as rate"
    sort_by_depth: bool = False
    gnn_widths: list = field(default_factory=lambda: list(GNN_WIDTHS))
    feature_width: int = 32
    gnn_variant: str = "attention"
    # 2-D branch
    image_channels: list = field(default_factory=lambda: list(IMAGE_CHANNELS))
    radar_channels: list = field(default_factory=lambda: list(RADAR_CHANNELS))
    decoder_widths: list = field(default_factory=lambda: list(DECODER_WIDTHS))
    ascb_groups: list = field(default_factory=lambda: default_spec().to_list())
    conventional_kernels: list = field(default_factory=lambda: list(conventional_spec().groups[0].kernels))
    ascb_learnable: bool = True
    max_depth: float = MAX_DEPTH
    attr_scale: float = 0.1  # multiplies velocity and RCS before they enter the network
    # ablations
    no_ascb: bool = False
    conventional_sparse: bool = False
    no_gnn: bool = False
    no_upsample: bool = False

    def __post_init__(self):
        self.validate()

    @classmethod
    def full_scale(cls, **kw):
        kw.setdefault("height", FULL_CROP[0])
        kw.setdefault("width", FULL_CROP[1])
        return cls(**kw)

    def validate(self):
        if self.height <= 0 or self.width <= 0 or self.height % 32 or self.width % 32:
            raise ConfigError(f"crop {self.height}x{self.width} must be positive and divisible by 32")
        if not self.lr > 0:
            raise ConfigError("learning rate must be positive")
        if self.batch_size < 1 or self.iterations < 1:
            raise ConfigError("batch_size and iterations must be >= 1")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0 < self.ds_fraction <= 1:
            raise ConfigError("ds_fraction must lie in (0, 1]")
        if self.gnn_variant not in ("attention", "dgcnn"):
            raise ConfigError(f"gnn_variant must be 'attention' or 'dgcnn', got {self.gnn_variant!r}")
        if len(self.image_channels) != 5 or len(self.radar_channels) != 5 or len(self.gnn_widths) != 5:
            raise ConfigError("image_channels, radar_channels and gnn_widths need five entries")
        if len(self.decoder_widths) != 6:
            raise ConfigError("decoder_widths needs six entries")
        if self.feature_width < 2:
            raise ConfigError("feature_width must be >= 2")
        self.upsampler_config()
        self.ascb_spec()
        DistanceGroupSpec.from_list([[0.0, None, list(self.conventional_kernels)]])

    def upsampler_config(self) -> UpsamplerConfig:
        return UpsamplerConfig(self.n_points, self.rate, self.n_units,
                               self.tconv_kernel or None, self.sort_by_depth)

    def ascb_spec(self) -> DistanceGroupSpec:
        if self.conventional_sparse:
            return DistanceGroupSpec.from_list([[0.0, None, list(self.conventional_kernels)]])
        return DistanceGroupSpec.from_list(self.ascb_groups)

    def radar_scale(self):
        """Per-channel input scale for (depth, v_x, v_y, rcs)."""
        a = self.attr_scale
        return (1.0 / self.max_depth, a, a, a)

    def ablation_tag(self) -> str:
        on = [f for f in ABLATION_FLAGS if getattr(self, f)]
        if self.gnn_variant != "attention":
            on.append(f"gnn_{self.gnn_variant}")
        return "-".join(on) if on else "full"

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {extra}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(d)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return type(self).from_dict(d)
