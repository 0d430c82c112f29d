"""Independent oracles and fixture builders shared across the tests.

Everything here recomputes expected values by a different route than the
library: plain-Python replays, union-find clustering, permutation search.
"""

import itertools
import math
import warnings
from contextlib import contextmanager

import numpy as np

from depthlabel import Box, CameraIntrinsics, OrganizedCloud, PlaneModel, SceneSpec, Sphere


@contextmanager
def quiet():
    """Silence pipeline warnings in fixtures that legitimately trigger them."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def mean_oracle(samples) -> float:
    """Exactly rounded arithmetic mean of a float list."""
    return math.fsum(samples) / len(samples)


def running_mean_replay(stream, jump):
    """Plain-Python replay of the reset-on-jump running mean.

    Returns (mean, count) for one pixel's sample stream; NaN/non-positive
    samples are skipped. Arithmetic mirrors a float64 total and one
    division per comparison, which is what the kernels promise.
    """
    total = 0.0
    n = 0
    for z in stream:
        z = float(z)
        if not math.isfinite(z) or z <= 0.0:
            continue
        if n == 0:
            total, n = z, 1
        elif abs(z - total / n) > jump:
            total, n = z, 1
        else:
            total, n = total + z, n + 1
    return (total / n if n else float("nan")), n


def change_flag_replay(prev_pt, curr_pt, c0, c1) -> int:
    """Scalar change classification for one pixel (enum code)."""
    def ok(pt):
        return all(math.isfinite(v) for v in pt) and pt[2] > 0
    vp, vc = ok(prev_pt), ok(curr_pt)
    if vp and vc:
        zp, zc = prev_pt[2], curr_pt[2]
        tau = c0 + c1 * min(zp, zc) ** 2
        if abs(zc - zp) > tau:
            return 1 if zc < zp else 2
        return 0
    if vc and not vp:
        return 3
    if vp and not vc:
        return 4
    return 5


def union_find_components(points, seeds, link, connectivity):
    """Connected components via union-find over the full edge list.

    Independent of the library's BFS/sparse-graph routes. Returns the
    same canonical numbering: -1 outside seeds, ids by row-major first
    pixel of each component.
    """
    h, w = seeds.shape
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    nodes = [(r, c) for r in range(h) for c in range(w) if seeds[r, c]]
    for node in nodes:
        parent[node] = node
    offs = [(0, 1), (1, 0)] + ([(1, 1), (1, -1)] if connectivity == 8 else [])
    for r, c in nodes:
        for dr, dc in offs:
            r2, c2 = r + dr, c + dc
            if not (0 <= r2 < h and 0 <= c2 < w) or not seeds[r2, c2]:
                continue
            d = points[r, c].astype(np.float64) - points[r2, c2].astype(np.float64)
            if float(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) <= link * link:
                union((r, c), (r2, c2))
    out = np.full((h, w), -1, dtype=np.int32)
    roots = {}
    for node in nodes:  # row-major, so first root sighting fixes the id
        root = find(node)
        if root not in roots:
            roots[root] = len(roots)
        out[node] = roots[root]
    return out


def brute_force_max_overlap(ov) -> int:
    """Maximum one-to-one overlap total by trying every permutation."""
    ng, npred = ov.shape
    k = min(ng, npred)
    best = 0
    rows = range(ng)
    for chosen in itertools.permutations(range(npred), k):
        for sub in itertools.combinations(rows, k):
            best = max(best, sum(int(ov[g, p]) for g, p in zip(sub, chosen)))
    return best


def simple_intrinsics(width=32, height=24, fx=40.0, fy=40.0) -> CameraIntrinsics:
    return CameraIntrinsics(fx=fx, fy=fy, cx=(width - 1) / 2.0,
                            cy=(height - 1) / 2.0, width=width, height=height)


def cloud_from_z(z, intr=None, color=None) -> OrganizedCloud:
    """Organized cloud with x, y derived from a depth grid along the rays."""
    z = np.asarray(z, dtype=np.float64)
    h, w = z.shape
    if intr is None:
        intr = simple_intrinsics(width=w, height=h)
    from depthlabel import ray_tangents
    tan_x, tan_y = ray_tangents(intr)
    pts = np.stack([tan_x * z, tan_y * z, z], axis=2)
    return OrganizedCloud(pts, color=color)


def labels_template(arr, stage=None):
    from depthlabel import LabelTemplate
    arr = np.asarray(arr, dtype=np.uint16)
    if stage is None:
        stage = int(arr.max())
    return LabelTemplate(arr, stage)


def random_cloud(rng, h=6, w=7, color=True, nan_frac=0.15) -> OrganizedCloud:
    """Random organized cloud with a sprinkling of invalid pixels."""
    pts = rng.uniform(-2.0, 2.0, size=(h, w, 3)).astype(np.float32)
    drop = rng.random((h, w)) < nan_frac
    pts[drop] = np.nan
    col = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8) if color else None
    return OrganizedCloud(pts, color=col)


def assert_clouds_bitwise_equal(a, b):
    assert a.points.dtype == b.points.dtype
    assert np.array_equal(a.points.view(np.uint32), b.points.view(np.uint32))
    if a.color is None:
        assert b.color is None
    else:
        assert np.array_equal(a.color, b.color)


def templates_from_overlap(ov, gt_ids=None, pred_ids=None):
    """Build a 1-row gt/pred pair realizing a given overlap matrix."""
    ov = np.asarray(ov)
    ng, npred = ov.shape
    gt_ids = list(range(ng)) if gt_ids is None else gt_ids
    pred_ids = list(range(npred)) if pred_ids is None else pred_ids
    g_row, p_row = [], []
    for i in range(ng):
        for j in range(npred):
            g_row += [gt_ids[i]] * int(ov[i, j])
            p_row += [pred_ids[j]] * int(ov[i, j])
    gt = np.asarray([g_row], dtype=np.uint16)
    pred = np.asarray([p_row], dtype=np.uint16)
    return labels_template(gt), labels_template(pred)


def closure_spec(noisy=False, frames=20, seed=11) -> SceneSpec:
    """The 10-object end-to-end scene: 5 boxes, 5 spheres, 2+ occlusions.

    Box placement keeps every visible side face at least 0.14 m off the
    optical axis so grazing surfaces step at most ~34 mm per pixel; the
    closure runs cluster with link_distance 0.04 to bridge those steps.
    """
    intr = CameraIntrinsics(fx=560.0, fy=560.0, cx=159.5, cy=119.5,
                            width=320, height=240)
    objects = (
        Box(center=(-0.26, 0.20, 1.55), size=(0.16, 0.12, 0.12)),
        Box(center=(0.00, 0.21, 1.52), size=(0.20, 0.12, 0.10)),
        Box(center=(0.27, 0.19, 1.50), size=(0.14, 0.10, 0.10)),
        Box(center=(-0.02, -0.22, 1.45), size=(0.22, 0.12, 0.10)),
        Box(center=(0.30, -0.20, 1.42), size=(0.12, 0.12, 0.08)),
        Sphere(center=(-0.30, -0.12, 1.40), radius=0.10),
        Sphere(center=(0.05, -0.02, 1.45), radius=0.11),
        Sphere(center=(0.33, 0.02, 1.38), radius=0.09),
        Sphere(center=(-0.12, 0.14, 1.30), radius=0.10),
        Sphere(center=(0.18, -0.13, 1.28), radius=0.09),
    )
    return SceneSpec(
        intrinsics=intr,
        background=PlaneModel(normal=(0.0, 0.0, 1.0), distance=1.8),
        objects=objects,
        noise_sigma0=0.001 if noisy else 0.0,
        noise_sigma1=0.0019 if noisy else 0.0,
        frames_per_stage=frames,
        dropout_rate=0.02 if noisy else 0.0,
        seed=seed,
    )


def small_scene_spec(n_objects=2, width=80, height=60, noisy=False, seed=5) -> SceneSpec:
    """A fast low-resolution scene for CLI and labeling fixtures."""
    intr = CameraIntrinsics(fx=140.0, fy=140.0, cx=(width - 1) / 2.0,
                            cy=(height - 1) / 2.0, width=width, height=height)
    objects = (
        Box(center=(-0.12, 0.10, 1.50), size=(0.10, 0.08, 0.06)),
        Sphere(center=(0.10, -0.06, 1.40), radius=0.07),
        Box(center=(0.00, 0.08, 1.30), size=(0.10, 0.06, 0.05)),
        Sphere(center=(-0.10, -0.10, 1.25), radius=0.06),
    )[:n_objects]
    return SceneSpec(
        intrinsics=intr,
        background=PlaneModel(normal=(0.0, 0.0, 1.0), distance=1.8),
        objects=objects,
        noise_sigma0=0.0005 if noisy else 0.0,
        noise_sigma1=0.001 if noisy else 0.0,
        frames_per_stage=4,
        dropout_rate=0.01 if noisy else 0.0,
        seed=seed,
    )
