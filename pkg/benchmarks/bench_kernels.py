#!/usr/bin/env python3
"""Time the compiled kernels against the NumPy fallback.

Runs both implementations on the same synthetic workload, checks that
their outputs agree, and prints per-kernel timings with the speedup.
"""

import argparse
import time

import numpy as np

from depthlabel import _kernels_py

try:
    from depthlabel import _kernels
except ImportError:
    _kernels = None


def make_depth_stack(rng, frames, h, w):
    # tabletop-ish depths around 0.5..2.5 m with depth-scaled noise, 2%
    # dropouts, and a mid-recording jump on the top quarter to force resets
    base = rng.uniform(0.5, 2.5, size=(h, w))
    stack = base + rng.normal(0.0, 0.002, size=(frames, h, w)) * base ** 2
    stack[rng.random((frames, h, w)) < 0.02] = np.nan
    stack[frames // 2:, : h // 4] += 0.3
    return np.ascontiguousarray(stack)


def make_component_inputs(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w]
    z = 1.0 + 0.2 * np.sin(xx / 37.0) + 0.2 * np.cos(yy / 23.0)
    z += rng.normal(0.0, 0.001, size=z.shape)
    points = np.dstack([(xx - w / 2) * z / 540.0,
                        (yy - h / 2) * z / 540.0,
                        z])
    # blobby seed patches covering roughly a quarter of the image
    field = np.sin(xx / 9.0) * np.cos(yy / 11.0) + 0.3 * rng.random((h, w))
    seeds = (field > 0.55).astype(np.uint8)
    return np.ascontiguousarray(points), seeds


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(
        description="compare compiled and fallback kernel timings")
    ap.add_argument("--height", type=int, default=480)
    ap.add_argument("--width", type=int, default=640)
    ap.add_argument("--frames", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _kernels is None:
        raise SystemExit("compiled extension not built; nothing to compare")

    rng = np.random.default_rng(args.seed)
    stack = make_depth_stack(rng, args.frames, args.height, args.width)
    points, seeds = make_component_inputs(rng, args.height, args.width)

    rows = []
    t_c, (mean_c, count_c) = best_of(
        lambda: _kernels.accumulate_depth(stack, 0.05), args.repeats)
    t_p, (mean_p, count_p) = best_of(
        lambda: _kernels_py.accumulate_depth(stack, 0.05), args.repeats)
    assert np.array_equal(mean_c, mean_p, equal_nan=True)
    assert np.array_equal(count_c, count_p)
    rows.append(("accumulate_depth", t_c, t_p))

    t_c, lab_c = best_of(
        lambda: _kernels.grid_components(points, seeds, 0.02, 8), args.repeats)
    t_p, lab_p = best_of(
        lambda: _kernels_py.grid_components(points, seeds, 0.02, 8),
        args.repeats)
    assert np.array_equal(lab_c, lab_p)
    rows.append(("grid_components", t_c, t_p))

    print(f"{args.width}x{args.height}, {args.frames} frames, "
          f"best of {args.repeats}, outputs identical")
    print(f"{'kernel':<20} {'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for name, tc, tp in rows:
        print(f"{name:<20} {tc * 1e3:>8.2f}ms {tp * 1e3:>8.2f}ms "
              f"{tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
