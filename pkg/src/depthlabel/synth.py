"""Synthetic incremental scenes with exact ground truth.

Ray-casts a background plane plus axis-aligned boxes and spheres into
organized clouds, one added object per stage, with optional quadratic
range-dependent Gaussian depth noise and dropout. The analytic geometry
doubles as the oracle for the labeling pipeline: true_template knows the
frontmost object at every pixel.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pcd
from .cloud import CameraIntrinsics, OrganizedCloud, ray_tangents
from .export import label_color
from .imgio import write_label_png
from .labeling import LabelTemplate

_BACKGROUND_GRAY = (120, 120, 120)


@dataclass(frozen=True)
class PlaneModel:
    """Plane {x : normal . x = distance}, meters."""

    normal: tuple[float, float, float]
    distance: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if n.shape != (3,) or not np.isfinite(n).all() or not n.any():
            raise ValueError(f"plane normal must be a nonzero 3-vector, got {self.normal}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: center and full extents, meters."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]

    def __post_init__(self):
        if len(self.center) != 3 or len(self.size) != 3:
            raise ValueError("box center and size must be 3-vectors")
        if any(s <= 0 for s in self.size):
            raise ValueError(f"box extents must be positive, got {self.size}")


@dataclass(frozen=True)
class Sphere:
    """Sphere: center and radius, meters."""

    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if len(self.center) != 3:
            raise ValueError("sphere center must be a 3-vector")
        if self.radius <= 0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class SceneSpec:
    """Full recipe for one synthetic scene recording."""

    intrinsics: CameraIntrinsics
    background: PlaneModel
    objects: tuple = ()
    noise_sigma0: float = 0.001
    noise_sigma1: float = 0.0019
    frames_per_stage: int = 20
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma0 < 0 or self.noise_sigma1 < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.frames_per_stage < 1:
            raise ValueError(
                f"frames_per_stage must be >= 1, got {self.frames_per_stage}")
        for k, obj in enumerate(self.objects):
            if not isinstance(obj, (Box, Sphere)):
                raise ValueError(f"object {k} is neither a box nor a sphere")

    @property
    def num_stages(self) -> int:
        """Stage count: the empty scene plus one stage per object."""
        return len(self.objects) + 1


def _ray_dirs(intr: CameraIntrinsics) -> np.ndarray:
    """Per-pixel ray directions with dz = 1, so ray parameter t is z-depth."""
    tan_x, tan_y = ray_tangents(intr)
    dirs = np.empty((intr.height, intr.width, 3), dtype=np.float64)
    dirs[:, :, 0] = tan_x
    dirs[:, :, 1] = tan_y
    dirs[:, :, 2] = 1.0
    return dirs


def _intersect_plane(plane: PlaneModel, dirs: np.ndarray) -> np.ndarray:
    n = np.asarray(plane.normal, dtype=np.float64)
    denom = dirs @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = plane.distance / denom
    t = np.where(np.isfinite(t) & (t > 0), t, np.inf)
    return t


def _intersect_box(box: Box, dirs: np.ndarray) -> np.ndarray:
    lo = np.asarray(box.center, dtype=np.float64) - \
        np.asarray(box.size, dtype=np.float64) / 2.0
    hi = np.asarray(box.center, dtype=np.float64) + \
        np.asarray(box.size, dtype=np.float64) / 2.0
    shape = dirs.shape[:2]
    tenter = np.full(shape, -np.inf)
    texit = np.full(shape, np.inf)
    for i in range(3):
        d = dirs[:, :, i]
        zero = d == 0.0
        safe = np.where(zero, 1.0, d)
        a = lo[i] / safe
        b = hi[i] / safe
        t1 = np.minimum(a, b)
        t2 = np.maximum(a, b)
        # parallel rays pass iff the camera sits inside this slab
        inside = lo[i] <= 0.0 <= hi[i]
        t1 = np.where(zero, -np.inf if inside else np.inf, t1)
        t2 = np.where(zero, np.inf if inside else -np.inf, t2)
        tenter = np.maximum(tenter, t1)
        texit = np.minimum(texit, t2)
    hit = (tenter <= texit) & (texit > 0)
    t = np.where(tenter > 0, tenter, texit)
    return np.where(hit & (t > 0), t, np.inf)


def _intersect_sphere(sph: Sphere, dirs: np.ndarray) -> np.ndarray:
    c = np.asarray(sph.center, dtype=np.float64)
    a = np.einsum("ijk,ijk->ij", dirs, dirs)
    b = dirs @ c
    cc = float(c @ c) - sph.radius * sph.radius
    disc = b * b - a * cc
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t0 = (b - sq) / a
    t1 = (b + sq) / a
    t = np.where(t0 > 0, t0, t1)
    return np.where(hit & (t > 0), t, np.inf)


def _intersect(obj, dirs: np.ndarray) -> np.ndarray:
    if isinstance(obj, Box):
        return _intersect_box(obj, dirs)
    return _intersect_sphere(obj, dirs)


def _scene_depth(spec: SceneSpec, stage: int):
    """Noiseless z-depth and frontmost-object labels for one stage."""
    if not 0 <= stage <= len(spec.objects):
        raise ValueError(
            f"stage must be in [0, {len(spec.objects)}], got {stage}")
    dirs = _ray_dirs(spec.intrinsics)
    t = _intersect_plane(spec.background, dirs)
    labels = np.zeros(t.shape, dtype=np.uint16)
    for k, obj in enumerate(spec.objects[:stage], start=1):
        tk = _intersect(obj, dirs)
        closer = tk < t
        t = np.where(closer, tk, t)
        labels[closer] = k
    return t, labels


def true_depth(spec: SceneSpec, stage: int) -> np.ndarray:
    """Analytic z-depth grid for a stage, NaN where no surface is hit."""
    t, _ = _scene_depth(spec, stage)
    return np.where(np.isfinite(t), t, np.nan)


def true_template(spec: SceneSpec, stage: int) -> LabelTemplate:
    """Exact visibility labeling: frontmost object id per pixel, else 0."""
    _, labels = _scene_depth(spec, stage)
    return LabelTemplate(labels, stage)


def render_stage(spec: SceneSpec, stage: int, frame: int) -> OrganizedCloud:
    """Render one frame of one stage, deterministic in (seed, stage, frame).

    Depth noise is zero-mean Gaussian with sigma(z) = sigma0 + sigma1 *
    z**2, applied along the pixel ray; dropout pixels come out invalid.
    The noise and dropout grids are always drawn, in that order, so the
    random stream does not depend on the noise settings.
    """
    if frame < 0:
        raise ValueError(f"frame must be >= 0, got {frame}")
    t, labels = _scene_depth(spec, stage)
    rng = np.random.default_rng([spec.seed, stage, frame])
    noise = rng.standard_normal(t.shape)
    u = rng.random(t.shape)

    hit = np.isfinite(t)
    z = np.full(t.shape, np.nan)
    th = t[hit]
    z[hit] = th + noise[hit] * (spec.noise_sigma0 + spec.noise_sigma1 * th * th)
    z[u < spec.dropout_rate] = np.nan

    intr = spec.intrinsics
    tan_x, tan_y = ray_tangents(intr)
    pts = np.empty((intr.height, intr.width, 3), dtype=np.float64)
    pts[:, :, 0] = tan_x * z
    pts[:, :, 1] = tan_y * z
    pts[:, :, 2] = z

    color = np.empty((intr.height, intr.width, 3), dtype=np.uint8)
    color[:] = _BACKGROUND_GRAY
    for k in range(1, stage + 1):
        color[labels == k] = label_color(k)
    return OrganizedCloud(pts, color=color,
                          frame_id=f"stage{stage:03d}_frame{frame:03d}")


# ---------------------------------------------------------------------------
# Scene config files (flat JSON) and batch output

_TOP_KEYS = {"width", "height", "fx", "fy", "cx", "cy", "background", "objects",
             "noise_sigma0", "noise_sigma1", "frames_per_stage", "dropout_rate",
             "seed"}
_REQUIRED_KEYS = {"width", "height", "fx", "fy", "cx", "cy", "background",
                  "objects"}


def _check_keys(d: dict, allowed: set, required: set, where: str) -> None:
    for key in d:
        if key not in allowed:
            raise ValueError(f"unknown key {key!r} in {where}")
    for key in required:
        if key not in d:
            raise ValueError(f"missing key {key!r} in {where}")


def parse_spec(d: dict) -> SceneSpec:
    """Build a SceneSpec from a config mapping, rejecting unknown keys."""
    _check_keys(d, _TOP_KEYS, _REQUIRED_KEYS, "scene spec")
    bg = d["background"]
    _check_keys(bg, {"normal", "distance"}, {"normal", "distance"},
                "scene spec background")
    objects = []
    for k, entry in enumerate(d["objects"]):
        kind = entry.get("type")
        where = f"scene spec object {k}"
        if kind == "box":
            _check_keys(entry, {"type", "center", "size"},
                        {"type", "center", "size"}, where)
            objects.append(Box(center=tuple(entry["center"]),
                               size=tuple(entry["size"])))
        elif kind == "sphere":
            _check_keys(entry, {"type", "center", "radius"},
                        {"type", "center", "radius"}, where)
            objects.append(Sphere(center=tuple(entry["center"]),
                                  radius=float(entry["radius"])))
        else:
            raise ValueError(f"unknown object type {kind!r} in {where}")
    intr = CameraIntrinsics(width=int(d["width"]), height=int(d["height"]),
                            fx=float(d["fx"]), fy=float(d["fy"]),
                            cx=float(d["cx"]), cy=float(d["cy"]))
    return SceneSpec(
        intrinsics=intr,
        background=PlaneModel(normal=tuple(bg["normal"]),
                              distance=float(bg["distance"])),
        objects=tuple(objects),
        noise_sigma0=float(d.get("noise_sigma0", 0.001)),
        noise_sigma1=float(d.get("noise_sigma1", 0.0019)),
        frames_per_stage=int(d.get("frames_per_stage", 20)),
        dropout_rate=float(d.get("dropout_rate", 0.0)),
        seed=int(d.get("seed", 0)),
    )


def load_spec(path) -> SceneSpec:
    """Load a scene spec from a flat JSON config file."""
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed scene spec {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ValueError(f"scene spec {path} must be a mapping")
    return parse_spec(d)


def write_scene(spec: SceneSpec, out_dir, data: str = "binary") -> None:
    """Write the full recording: stage frame PCDs plus truth templates.

    Layout matches what the labeler consumes: ``stage_000/frame_000.pcd``
    upward, plus ``truth/stage_000_label.png`` per stage.
    """
    out = Path(out_dir)
    truth = out / "truth"
    truth.mkdir(parents=True, exist_ok=True)
    for stage in range(spec.num_stages):
        stage_dir = out / f"stage_{stage:03d}"
        stage_dir.mkdir(exist_ok=True)
        for frame in range(spec.frames_per_stage):
            cloud = render_stage(spec, stage, frame)
            pcd.save_cloud(cloud, stage_dir / f"frame_{frame:03d}.pcd", data=data)
        write_label_png(truth / f"stage_{stage:03d}_label.png",
                        true_template(spec, stage).labels)
