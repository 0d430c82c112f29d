"""Organized RGB-D point clouds, camera intrinsics, and scene metadata.

An organized cloud keeps the sensor's pixel grid: ``points[v, u]`` is the
3D point seen by pixel ``(u, v)``. Invalid measurements are stored as
non-finite coordinates and must never enter arithmetic; every consumer
branches on :meth:`OrganizedCloud.valid_mask`, not on magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Subset(str, Enum):
    ARID20 = "ARID20"
    ARID10 = "ARID10"
    YCB10 = "YCB10"
    OTHER = "other"


class Clutter(str, Enum):
    FREE = "free"
    TOUCHING = "touching"
    STACKED = "stacked"
    NONE = "none"


class Shape(str, Enum):
    CUBOID = "cuboid"
    CURVED = "curved"
    MIXED = "mixed"
    ORGANIC = "organic"
    NON_ORGANIC = "non-organic"
    NONE = "none"


class Plane(str, Enum):
    FLOOR = "floor"
    TABLE = "table"
    NONE = "none"


class Viewpoint(str, Enum):
    BOTTOM = "bottom"
    TOP = "top"
    NONE = "none"


@dataclass(frozen=True)
class FactorTags:
    """Categorical scene descriptors used to group evaluation results."""

    clutter: Clutter = Clutter.NONE
    shape: Shape = Shape.NONE
    plane: Plane = Plane.NONE
    viewpoint: Viewpoint = Viewpoint.NONE

    @classmethod
    def from_strings(cls, clutter="none", shape="none", plane="none",
                     viewpoint="none") -> "FactorTags":
        return cls(Clutter(clutter), Shape(shape), Plane(plane),
                   Viewpoint(viewpoint))


@dataclass(frozen=True)
class SceneMeta:
    scene_id: str
    subset: Subset = Subset.OTHER
    factors: FactorTags = field(default_factory=FactorTags)
    camera_height_m: float | None = None
    frames_per_stage: int = 20

    def __post_init__(self):
        if self.frames_per_stage < 1:
            raise ValueError("frames_per_stage must be >= 1")


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the sensor")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("sensor resolution must be positive")


class OrganizedCloud:
    """Width x height grid of 3D points with optional per-pixel color.

    ``points`` is an (height, width, 3) float array in meters; a point is
    valid iff all three coordinates are finite. ``color`` is an optional
    (height, width, 3) uint8 grid registered on the same pixel raster.
    """

    __slots__ = ("points", "color", "frame_id")

    def __init__(self, points: np.ndarray, color: np.ndarray | None = None,
                 frame_id: str = ""):
        points = np.ascontiguousarray(points)
        if points.ndim != 3 or points.shape[2] != 3:
            raise ValueError(f"points must be (h, w, 3), got {points.shape}")
        if points.shape[0] < 1 or points.shape[1] < 1:
            raise ValueError("cloud must have positive width and height")
        if points.dtype not in (np.float32, np.float64):
            raise ValueError(f"points must be float32 or float64, got {points.dtype}")
        if color is not None:
            color = np.ascontiguousarray(color)
            if color.shape != points.shape:
                raise ValueError(
                    f"color grid {color.shape} does not match points {points.shape}")
            if color.dtype != np.uint8:
                raise ValueError(f"color must be uint8, got {color.dtype}")
        self.points = points
        self.color = color
        self.frame_id = frame_id

    @property
    def width(self) -> int:
        return self.points.shape[1]

    @property
    def height(self) -> int:
        return self.points.shape[0]

    @property
    def depth(self) -> np.ndarray:
        """The z channel, (height, width)."""
        return self.points[:, :, 2]

    @property
    def valid_mask(self) -> np.ndarray:
        """Boolean (height, width) mask: all three coordinates finite."""
        return np.isfinite(self.points).all(axis=2)

    def same_grid(self, other: "OrganizedCloud") -> bool:
        return self.width == other.width and self.height == other.height


def pixel_to_ray(intr: CameraIntrinsics, u: float, v: float) -> np.ndarray:
    """Unit view ray through pixel (u, v).

    The ray at the principal point is (0, 0, 1); x grows with u, y with v.
    """
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise ValueError(f"pixel ({u}, {v}) outside {intr.width}x{intr.height} sensor")
    d = np.array([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0])
    return d / np.linalg.norm(d)


def ray_tangents(intr: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel ray slopes ((x/z, y/z) grids, float64).

    Multiplying a depth grid by these recovers the x and y channels of an
    organized cloud on this camera.
    """
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    tan_x = np.broadcast_to((u - intr.cx) / intr.fx, (intr.height, intr.width))
    tan_y = np.broadcast_to(((v - intr.cy) / intr.fy)[:, None],
                            (intr.height, intr.width))
    return np.ascontiguousarray(tan_x), np.ascontiguousarray(tan_y)


def cloud_from_depth(depth_mm: np.ndarray, intr: CameraIntrinsics,
                     color: np.ndarray | None = None,
                     frame_id: str = "") -> OrganizedCloud:
    """Back-project a 16-bit depth image (millimeters, 0 = invalid).

    Produces a float32 organized cloud on the camera's pixel grid.
    """
    depth_mm = np.asarray(depth_mm)
    if depth_mm.ndim != 2:
        raise ValueError(f"depth image must be 2D, got shape {depth_mm.shape}")
    if depth_mm.shape != (intr.height, intr.width):
        raise ValueError(
            f"depth image {depth_mm.shape} does not match intrinsics "
            f"{(intr.height, intr.width)}")
    z = depth_mm.astype(np.float64) / 1000.0
    z[depth_mm == 0] = np.nan
    tan_x, tan_y = ray_tangents(intr)
    pts = np.stack([tan_x * z, tan_y * z, z], axis=2).astype(np.float32)
    return OrganizedCloud(pts, color=color, frame_id=frame_id)
