"""Kernel dispatch: compiled extension when available, NumPy fallback otherwise.

Both implementations follow the same arithmetic contract (float64 sums in
frame order, one division per jump comparison, squared-distance gate), so
results are bitwise identical either way.  Set the environment variable
DEPTHLABEL_PURE=1 to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("DEPTHLABEL_PURE"):
    _impl = _kernels_py
    HAVE_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        HAVE_COMPILED = True
    except ImportError:
        _impl = _kernels_py
        HAVE_COMPILED = False


def accumulate_depth(stack, jump):
    """Running per-pixel mean of a (nframes, h, w) depth stack.

    Samples that are non-finite or <= 0 are skipped.  A sample deviating
    from the running mean by more than ``jump`` restarts the mean at that
    sample.  Returns (mean, count): float64 mean (NaN where no sample was
    usable) and int32 count of samples in the surviving run.
    """
    stack = np.ascontiguousarray(stack, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError("depth stack must be (nframes, h, w)")
    return _impl.accumulate_depth(stack, float(jump))


def grid_components(points, seeds, link, connectivity=8):
    """Label connected components of seed pixels on the image grid.

    Two adjacent seed pixels join when their 3D points lie within ``link``
    metres.  Components are numbered 0.. in order of their first pixel in
    row-major scan; non-seed pixels get -1.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    seeds = np.ascontiguousarray(seeds, dtype=np.uint8)
    if points.ndim != 3 or points.shape[2] != 3:
        raise ValueError("points must be (h, w, 3)")
    if seeds.shape != points.shape[:2]:
        raise ValueError("seeds must match the point grid")
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    return _impl.grid_components(points, seeds, float(link), int(connectivity))
