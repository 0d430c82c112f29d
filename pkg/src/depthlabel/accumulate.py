"""Temporal smoothing of a stage's frames into one dense cloud.

Each pixel keeps a running mean of its valid depth samples; a sample
deviating from that mean by more than the jump threshold restarts the
mean at the new sample, so the output converges on the most recent
stable surface instead of blending old and new geometry.
"""

import warnings

import numpy as np

from . import kernels
from .cloud import OrganizedCloud

DEFAULT_JUMP_M = 0.05


class ShortRecordingWarning(UserWarning):
    """A stage was recorded with fewer frames than recommended."""


def default_frame_count() -> int:
    """Recommended frames per stage for stable smoothing."""
    return 20


class AccumulatorState:
    """Streaming per-pixel depth accumulator.

    Holds the running depth sum and sample count per pixel; ``mean_depth``
    exposes the current mean (NaN where no valid sample arrived yet).
    Feeding frames one by one through :meth:`push` yields bitwise the same
    mean as a batch :func:`accumulate` call over the same frames.
    """

    __slots__ = ("jump_threshold", "_total", "sample_count")

    def __init__(self, height: int, width: int, jump_threshold: float = DEFAULT_JUMP_M):
        if jump_threshold <= 0:
            raise ValueError(f"jump_threshold must be > 0, got {jump_threshold}")
        self.jump_threshold = float(jump_threshold)
        self._total = np.zeros((height, width), dtype=np.float64)
        self.sample_count = np.zeros((height, width), dtype=np.int32)

    @property
    def mean_depth(self) -> np.ndarray:
        """Current running mean per pixel, float64, NaN where count is 0."""
        out = np.full(self._total.shape, np.nan, dtype=np.float64)
        got = self.sample_count > 0
        out[got] = self._total[got] / self.sample_count[got]
        return out

    def push(self, depth: np.ndarray) -> None:
        """Fold one depth frame (NaN or <= 0 marks an invalid sample)."""
        z = np.asarray(depth, dtype=np.float64)
        if z.shape != self._total.shape:
            raise ValueError(
                f"frame shape {z.shape} does not match accumulator {self._total.shape}")
        usable = np.isfinite(z) & (z > 0.0)
        started = self.sample_count > 0
        mean = self._total / np.maximum(self.sample_count, 1)
        reset = usable & started & (np.abs(z - mean) > self.jump_threshold)
        extend = usable & started & ~reset
        restart = usable & (~started | reset)
        self._total = np.where(extend, self._total + z, self._total)
        self.sample_count = np.where(extend, self.sample_count + 1, self.sample_count)
        self._total = np.where(restart, z, self._total)
        self.sample_count = np.where(restart, 1, self.sample_count)


def accumulate(frames, jump_threshold: float = DEFAULT_JUMP_M) -> OrganizedCloud:
    """Smooth an ordered list of same-grid clouds into one cloud.

    Per pixel, the output depth is the mean of the maximal suffix of valid
    samples within which no sample deviates from the running mean by more
    than ``jump_threshold``; invalid samples are skipped without resetting.
    The x and y coordinates are re-derived from the smoothed depth along
    the pixel ray (slopes taken from each pixel's first valid sample), so
    the cloud stays geometrically consistent. Pixels with no valid sample
    come out invalid. Color, when present, is carried from the last frame.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("accumulate needs at least one frame")
    if jump_threshold <= 0:
        raise ValueError(f"jump_threshold must be > 0, got {jump_threshold}")
    first = frames[0]
    for k, f in enumerate(frames[1:], start=1):
        if not first.same_grid(f):
            raise ValueError(
                f"frame {k} is {f.width}x{f.height}, frame 0 is "
                f"{first.width}x{first.height}")
    if len(frames) < default_frame_count():
        warnings.warn(
            f"stage has {len(frames)} frames; {default_frame_count()} recommended",
            ShortRecordingWarning, stacklevel=2)

    h, w = first.height, first.width
    stack = np.empty((len(frames), h, w), dtype=np.float64)
    tan_x = np.full((h, w), np.nan, dtype=np.float64)
    tan_y = np.full((h, w), np.nan, dtype=np.float64)
    need = np.ones((h, w), dtype=bool)
    for k, f in enumerate(frames):
        pts = np.asarray(f.points, dtype=np.float64)
        z = pts[:, :, 2].copy()
        usable = np.isfinite(pts).all(axis=2) & (z > 0.0)
        z[~usable] = np.nan
        stack[k] = z
        take = need & usable
        if take.any():
            tan_x[take] = pts[:, :, 0][take] / z[take]
            tan_y[take] = pts[:, :, 1][take] / z[take]
            need &= ~take

    mean, _count = kernels.accumulate_depth(stack, jump_threshold)
    pts = np.stack([tan_x * mean, tan_y * mean, mean], axis=2).astype(np.float32)
    color = None
    for f in reversed(frames):
        if f.color is not None:
            color = f.color
            break
    return OrganizedCloud(pts, color=color, frame_id=first.frame_id)
