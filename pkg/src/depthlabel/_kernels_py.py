"""NumPy fallback for the compiled kernels.

The arithmetic here must match ``depthlabel._kernels`` bit for bit:
accumulation adds float64 samples in frame order and divides once per
comparison, distance gating evaluates ``dx*dx + dy*dy + dz*dz`` in
float64. Keep both implementations in lockstep when changing either.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


def accumulate_depth(stack: np.ndarray, jump: float):
    """Per-pixel running depth mean with reset on large jumps.

    stack: (frames, h, w) float64; samples that are non-finite or <= 0 are
    skipped. A sample deviating from the pixel's running mean by more than
    ``jump`` restarts the pixel at that sample. Returns ``(mean, count)``:
    float64 means (NaN where no samples) and int32 sample counts.
    """
    nframes, h, w = stack.shape
    total = np.zeros((h, w), dtype=np.float64)
    count = np.zeros((h, w), dtype=np.int32)
    for k in range(nframes):
        z = stack[k]
        usable = np.isfinite(z) & (z > 0.0)
        started = count > 0
        # running mean; lanes with count == 0 are masked out below
        mean = total / np.maximum(count, 1)
        reset = usable & started & (np.abs(z - mean) > jump)
        extend = usable & started & ~reset
        restart = usable & (~started | reset)
        total = np.where(extend, total + z, total)
        count = np.where(extend, count + 1, count)
        total = np.where(restart, z, total)
        count = np.where(restart, 1, count)
    mean = np.full((h, w), np.nan, dtype=np.float64)
    got = count > 0
    mean[got] = total[got] / count[got]
    return mean, count


def grid_components(points: np.ndarray, seeds: np.ndarray, link: float,
                    connectivity: int):
    """Connected components of seed pixels on the image grid.

    Grid-adjacent seeds (4- or 8-neighborhood) are linked iff the 3D
    distance between their points is <= ``link``. Returns an int32 (h, w)
    array: -1 outside seeds, otherwise a component id; components are
    numbered by the row-major position of their first pixel.
    """
    h, w = seeds.shape
    out = np.full((h, w), -1, dtype=np.int32)
    flat_idx = np.flatnonzero(seeds)
    nseeds = flat_idx.size
    if nseeds == 0:
        return out
    node_of = np.full(h * w, -1, dtype=np.int64)
    node_of[flat_idx] = np.arange(nseeds)

    offsets = [(0, 1), (1, 0)]
    if connectivity == 8:
        offsets += [(1, 1), (1, -1)]
    pts = points.reshape(-1, 3)
    link2 = link * link
    edges_a = []
    edges_b = []
    rr, cc = np.nonzero(seeds)
    for dr, dc in offsets:
        r2 = rr + dr
        c2 = cc + dc
        inb = (r2 >= 0) & (r2 < h) & (c2 >= 0) & (c2 < w)
        a = rr[inb] * w + cc[inb]
        b = r2[inb] * w + c2[inb]
        both = seeds.reshape(-1)[b] != 0
        a, b = a[both], b[both]
        d = pts[a] - pts[b]
        dist2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        near = dist2 <= link2
        edges_a.append(a[near])
        edges_b.append(b[near])
    a = node_of[np.concatenate(edges_a)]
    b = node_of[np.concatenate(edges_b)]
    graph = coo_matrix((np.ones(a.size, dtype=np.int8), (a, b)),
                       shape=(nseeds, nseeds))
    _, comp = connected_components(graph, directed=False)
    # renumber components by the row-major order of their first pixel
    _, first = np.unique(comp, return_index=True)
    rank = np.empty(first.size, dtype=np.int32)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    out.reshape(-1)[flat_idx] = rank[comp]
    return out
