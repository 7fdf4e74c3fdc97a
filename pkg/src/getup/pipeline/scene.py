"""Synthetic driving-like scenes and their on-disk layout.

A scene is a ground plane, a far wall and a handful of fronto-parallel boxes
seen by a pinhole camera 1.5 m above the ground. The dense depth map is the
ray-cast of that geometry; LiDAR is the back-projection of every
``lidar_row_stride``-th image row; radar is a sparse pick of LiDAR returns
(biased toward the boxes) with the height dropped and Gaussian noise added.

Directory layout of one scene (all arrays little-endian float64, C order)::

    manifest.txt   "key value" lines, see ``write_scene``
    image.bin      H*W*3
    depth.bin      H*W
    lidar.bin      M*3
    radar.bin      N*6   (x, y, z, v_x, v_y, rcs)
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import DataError
from ..geometry import CameraIntrinsics, back_project

SCENE_FORMAT = "getup-scene 1"
DATASET_FORMAT = "getup-dataset 1"
LE_F8 = np.dtype("<f8")


@dataclass(frozen=True)
class SceneSpec:
    height: int = 64
    width: int = 128
    focal: float = 100.0
    camera_height: float = 1.5
    min_boxes: int = 3
    max_boxes: int = 8
    box_depth: tuple = (3.0, 70.0)
    wall_depth: tuple = (60.0, 80.0)
    min_radar: int = 20
    max_radar: int = 64
    lidar_row_stride: int = 2
    zero_height: bool = True
    position_noise: float = 0.3
    depth_noise: float = 0.8
    max_depth: float = 80.0

    def __post_init__(self):
        if self.height < 2 or self.width < 2 or self.focal <= 0:
            raise DataError("scene extents and focal length must be positive")
        if not 1 <= self.min_radar <= self.max_radar:
            raise DataError("need 1 <= min_radar <= max_radar")
        if not 0 <= self.min_boxes <= self.max_boxes:
            raise DataError("need 0 <= min_boxes <= max_boxes")
        if self.lidar_row_stride < 1:
            raise DataError("lidar_row_stride must be >= 1")
        if self.position_noise < 0 or self.depth_noise < 0:
            raise DataError("noise levels must be non-negative")
        if not 1.0 <= self.box_depth[0] <= self.box_depth[1] <= self.max_depth:
            raise DataError("box depths must lie in [1, max_depth]")
        if not self.wall_depth[0] <= self.wall_depth[1] <= self.max_depth:
            raise DataError("wall depths must not exceed max_depth")

    @classmethod
    def noise_free(cls, **kw):
        kw.update(zero_height=False, position_noise=0.0, depth_noise=0.0)
        return cls(**kw)

    def intrinsics(self):
        return CameraIntrinsics(self.focal, self.focal, self.width / 2.0, self.height / 2.0)

    def to_dict(self):
        d = asdict(self)
        d["box_depth"] = list(self.box_depth)
        d["wall_depth"] = list(self.wall_depth)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        d = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in known}
        return cls(**d)


@dataclass
class Scene:
    image: np.ndarray  # H x W x 3 in [0, 1]
    depth: np.ndarray  # H x W metres
    lidar: np.ndarray  # M x 3
    radar: np.ndarray  # N x 6
    intrinsics: CameraIntrinsics
    seed: int

    @property
    def shape(self):
        return self.depth.shape


def scene_seed(base_seed, index):
    return int(base_seed) * 1_000_003 + int(index)


def _ray_grid(spec: SceneSpec, intr: CameraIntrinsics):
    v, u = np.mgrid[0:spec.height, 0:spec.width]
    return (u + 0.5 - intr.cx) / intr.fx, (v + 0.5 - intr.cy) / intr.fy


def generate_scene(seed, spec: SceneSpec = SceneSpec()) -> Scene:
    rng = np.random.default_rng(seed)
    intr = spec.intrinsics()
    H, W = spec.height, spec.width
    rx, ry = _ray_grid(spec, intr)

    wall = rng.uniform(*spec.wall_depth)
    depth = np.full((H, W), wall)
    label = np.full((H, W), -1, dtype=np.int64)  # -1 wall, 0 ground, j >= 1 box j

    below = ry > 0
    z_ground = np.where(below, spec.camera_height / np.where(below, ry, 1.0), np.inf)
    hit = z_ground < depth
    depth[hit] = z_ground[hit]
    label[hit] = 0

    n_boxes = int(rng.integers(spec.min_boxes, spec.max_boxes + 1))
    colours = [None]
    half_fov = (W / 2.0) / intr.fx
    for j in range(1, n_boxes + 1):
        z = rng.uniform(*spec.box_depth)
        half_w = rng.uniform(0.5, 3.0)
        h = rng.uniform(1.0, 4.0)
        xc = rng.uniform(-0.9, 0.9) * z * half_fov
        colours.append(rng.uniform(0.15, 0.95, size=3))
        x_hit = np.abs(rx * z - xc) <= half_w
        y_hit = (ry * z >= spec.camera_height - h) & (ry * z <= spec.camera_height)
        hit = x_hit & y_hit & (z < depth)
        depth[hit] = z
        label[hit] = j

    image = _shade(depth, label, colours, rx, ry, spec, rng)
    lidar = _lidar(depth, intr, spec)
    radar = _radar(depth, label, intr, spec, rng, n_boxes)
    return Scene(image, depth, lidar, radar, intr, int(seed))


def _shade(depth, label, colours, rx, ry, spec, rng):
    H, W = depth.shape
    img = np.empty((H, W, 3))
    sky = np.array([0.55, 0.68, 0.85])
    img[:] = sky * (0.8 + 0.2 * np.clip(-ry, 0, 1))[:, :, None]
    ground = label == 0
    gx = rx * depth
    checker = (np.floor(gx / 2.0) + np.floor(depth / 2.0)) % 2
    img[ground] = (0.3 + 0.08 * checker[ground])[:, None] * np.ones(3)
    for j in range(1, len(colours)):
        m = label == j
        shade = 0.85 + 0.15 * np.cos(3.0 * rx[m] * depth[m])
        img[m] = colours[j] * shade[:, None]
    fog = np.clip(depth / spec.max_depth, 0, 1)[:, :, None] * 0.5
    img = img * (1 - fog) + fog * np.array([0.7, 0.7, 0.75])
    img += rng.normal(0.0, 0.01, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def _lidar(depth, intr, spec):
    H, W = depth.shape
    rows = np.arange(0, H, spec.lidar_row_stride)
    v, u = np.meshgrid(rows, np.arange(W), indexing="ij")
    coords = np.column_stack([u.ravel(), v.ravel()])
    return back_project(coords, depth[v.ravel(), u.ravel()], intr)


def _radar(depth, label, intr, spec, rng, n_boxes):
    H, W = depth.shape
    rows = np.arange(0, H, spec.lidar_row_stride)
    v, u = np.meshgrid(rows, np.arange(W), indexing="ij")
    v, u = v.ravel(), u.ravel()
    lab = label[v, u]
    n = int(rng.integers(spec.min_radar, spec.max_radar + 1))
    on_box = np.flatnonzero(lab >= 1)
    rest = np.flatnonzero(lab < 1)
    take_box = min(n, on_box.size)
    pick = rng.choice(on_box, size=take_box, replace=False) if take_box else np.zeros(0, np.int64)
    if n > take_box:
        extra = rng.choice(rest, size=min(n - take_box, rest.size), replace=False)
        pick = np.concatenate([pick, extra])
    pick = np.sort(pick)
    xyz = back_project(np.column_stack([u[pick], v[pick]]), depth[v[pick], u[pick]], intr)

    vel = rng.uniform(-8.0, 8.0, size=(n_boxes + 1, 2))
    vel[0] = 0.0
    rcs_mean = np.concatenate([[0.0], rng.uniform(2.0, 15.0, size=n_boxes)])
    obj = np.maximum(lab[pick], 0)
    velocity = vel[obj] + rng.normal(0.0, 0.2, size=(pick.size, 2))
    rcs = rcs_mean[obj] + rng.normal(0.0, 1.0, size=pick.size)

    if spec.zero_height:
        xyz[:, 1] = 0.0
    xyz[:, 0] += rng.normal(0.0, spec.position_noise, size=pick.size) if spec.position_noise else 0.0
    if spec.depth_noise:
        xyz[:, 2] += rng.normal(0.0, spec.depth_noise, size=pick.size)
    xyz[:, 2] = np.clip(xyz[:, 2], 0.5, float(depth.max()))
    return np.column_stack([xyz, velocity, rcs])


# ---------------------------------------------------------------- persistence


def _write_array(path, arr):
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(arr, dtype=LE_F8).tobytes())


def _read_array(path, shape):
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except FileNotFoundError:
        raise DataError(f"missing scene array {path}") from None
    n = int(np.prod(shape))
    if len(buf) != 8 * n:
        raise DataError(f"{path}: expected {8 * n} bytes, found {len(buf)}")
    return np.frombuffer(buf, dtype=LE_F8).astype(np.float64).reshape(shape)


def write_scene(directory, scene: Scene):
    os.makedirs(directory, exist_ok=True)
    H, W = scene.shape
    i = scene.intrinsics
    lines = [
        f"format {SCENE_FORMAT}",
        f"seed {scene.seed}",
        f"height {H}",
        f"width {W}",
        f"fx {i.fx!r}",
        f"fy {i.fy!r}",
        f"cx {i.cx!r}",
        f"cy {i.cy!r}",
        f"lidar_points {scene.lidar.shape[0]}",
        f"radar_points {scene.radar.shape[0]}",
    ]
    with open(os.path.join(directory, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_array(os.path.join(directory, "image.bin"), scene.image)
    _write_array(os.path.join(directory, "depth.bin"), scene.depth)
    _write_array(os.path.join(directory, "lidar.bin"), scene.lidar)
    _write_array(os.path.join(directory, "radar.bin"), scene.radar)


def _read_manifest(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise DataError(f"missing manifest {path}") from None
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" ")
        out[key] = value.strip()
    return out


def read_scene(directory) -> Scene:
    m = _read_manifest(os.path.join(directory, "manifest.txt"))
    if m.get("format") != SCENE_FORMAT:
        raise DataError(f"{directory}: unsupported scene format {m.get('format')!r}")
    try:
        H, W = int(m["height"]), int(m["width"])
        M, N = int(m["lidar_points"]), int(m["radar_points"])
        intr = CameraIntrinsics(float(m["fx"]), float(m["fy"]), float(m["cx"]), float(m["cy"]))
        seed = int(m["seed"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{directory}: bad manifest ({exc})") from None
    return Scene(
        image=_read_array(os.path.join(directory, "image.bin"), (H, W, 3)),
        depth=_read_array(os.path.join(directory, "depth.bin"), (H, W)),
        lidar=_read_array(os.path.join(directory, "lidar.bin"), (M, 3)),
        radar=_read_array(os.path.join(directory, "radar.bin"), (N, 6)),
        intrinsics=intr,
        seed=seed,
    )


def _gen_one(args):
    seed, spec = args
    return generate_scene(seed, spec)


def generate_dataset(root, count, base_seed=0, spec: SceneSpec = SceneSpec(), workers=1):
    """Write ``count`` scenes under ``root``; scene ``i`` uses seed ``scene_seed(base_seed, i)``."""
    if count < 1:
        raise DataError("dataset must contain at least one scene")
    os.makedirs(root, exist_ok=True)
    jobs = [(scene_seed(base_seed, i), spec) for i in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scenes = list(pool.map(_gen_one, jobs))
    else:
        scenes = [_gen_one(j) for j in jobs]
    for i, s in enumerate(scenes):
        write_scene(os.path.join(root, f"scene_{i:04d}"), s)
    with open(os.path.join(root, "dataset.txt"), "w") as fh:
        fh.write(f"format {DATASET_FORMAT}\ncount {count}\nseed {int(base_seed)}\n")
        fh.write("spec " + json.dumps(spec.to_dict(), sort_keys=True) + "\n")
    return scenes


def dataset_scene_dirs(root):
    m = _read_manifest(os.path.join(root, "dataset.txt"))
    if m.get("format") != DATASET_FORMAT:
        raise DataError(f"{root}: not a scene dataset")
    count = int(m.get("count", 0))
    if count < 1:
        raise DataError(f"{root}: dataset is empty")
    return [os.path.join(root, f"scene_{i:04d}") for i in range(count)]


def load_dataset(root):
    return [read_scene(d) for d in dataset_scene_dirs(root)]
