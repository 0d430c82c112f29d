"""Per-pixel depth change between two accumulated clouds.

A depth difference only counts as real geometry change when it exceeds a
quadratic, range-dependent threshold, so sensor noise growing with
distance does not flood the mask.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .cloud import OrganizedCloud

DEFAULT_C0 = 0.005
DEFAULT_C1 = 0.0025


class ChangeFlag(IntEnum):
    """Per-pixel change classification. Values are the mask PNG codes."""

    UNCHANGED = 0
    CHANGED_CLOSER = 1
    CHANGED_FARTHER = 2
    APPEARED = 3
    DISAPPEARED = 4
    BOTH_INVALID = 5


@dataclass(frozen=True)
class ThresholdParams:
    """Depth-change threshold tau(z) = c0 + c1 * z**2, both in meters."""

    c0: float = DEFAULT_C0
    c1: float = DEFAULT_C1

    def __post_init__(self):
        if self.c0 < 0 or self.c1 < 0:
            raise ValueError(f"threshold coefficients must be >= 0, got {self}")
        if self.c0 + self.c1 == 0:
            raise ValueError("threshold must be positive somewhere: c0 + c1 > 0")


class ChangeMask:
    """Grid of ChangeFlag codes, one per pixel (uint8)."""

    __slots__ = ("flags",)

    def __init__(self, flags: np.ndarray):
        flags = np.ascontiguousarray(flags)
        if flags.ndim != 2:
            raise ValueError(f"flags must be 2D, got shape {flags.shape}")
        if flags.dtype != np.uint8:
            raise ValueError(f"flags must be uint8, got {flags.dtype}")
        if flags.max(initial=0) > int(max(ChangeFlag)):
            raise ValueError("flags contain values outside the ChangeFlag codes")
        self.flags = flags

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    def count(self, flag: ChangeFlag) -> int:
        return int(np.count_nonzero(self.flags == flag))


def threshold_at(params: ThresholdParams, z: float) -> float:
    """Minimum depth difference treated as geometry change at range z."""
    if z <= 0:
        raise ValueError(f"range must be positive, got {z}")
    return params.c0 + params.c1 * z * z


def change_mask(prev: OrganizedCloud, curr: OrganizedCloud,
                params: ThresholdParams) -> ChangeMask:
    """Classify every pixel by depth change from prev to curr.

    Both valid and |z_curr - z_prev| above tau(min(z_prev, z_curr)) flags
    the pixel changed_closer or changed_farther by sign; validity flips
    give appeared or disappeared; both invalid gives both_invalid; all
    else is unchanged. Points with non-positive depth count as invalid.
    """
    if not prev.same_grid(curr):
        raise ValueError(
            f"cloud dimensions differ: {prev.width}x{prev.height} vs "
            f"{curr.width}x{curr.height}")
    zp = prev.depth.astype(np.float64)
    zc = curr.depth.astype(np.float64)
    vp = prev.valid_mask & (zp > 0.0)
    vc = curr.valid_mask & (zc > 0.0)
    # NaN out invalid depths so the arithmetic below never sees inf
    zp = np.where(vp, zp, np.nan)
    zc = np.where(vc, zc, np.nan)
    dz = zc - zp
    zmin = np.minimum(zp, zc)
    tau = params.c0 + params.c1 * zmin * zmin
    with np.errstate(invalid="ignore"):
        changed = vp & vc & (np.abs(dz) > tau)
        closer = changed & (dz < 0)
        farther = changed & (dz > 0)
    flags = np.zeros(zp.shape, dtype=np.uint8)
    flags[closer] = ChangeFlag.CHANGED_CLOSER
    flags[farther] = ChangeFlag.CHANGED_FARTHER
    flags[~vp & vc] = ChangeFlag.APPEARED
    flags[vp & ~vc] = ChangeFlag.DISAPPEARED
    flags[~vp & ~vc] = ChangeFlag.BOTH_INVALID
    return ChangeMask(flags)
