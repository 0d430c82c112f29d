# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: temporal depth accumulation and gated flood fill.

Must stay bit-compatible with depthlabel._kernels_py: float64 sums in
frame order, distance gate dx*dx + dy*dy + dz*dz, components numbered by
row-major first pixel.
"""

import numpy as np

from libc.math cimport fabs, isfinite


def accumulate_depth(const double[:, :, ::1] stack, double jump):
    """Per-pixel running depth mean with reset on large jumps.

    Mirrors depthlabel._kernels_py.accumulate_depth.
    """
    cdef Py_ssize_t nframes = stack.shape[0]
    cdef Py_ssize_t h = stack.shape[1]
    cdef Py_ssize_t w = stack.shape[2]
    mean_arr = np.full((h, w), np.nan, dtype=np.float64)
    count_arr = np.zeros((h, w), dtype=np.int32)
    cdef double[:, ::1] mean = mean_arr
    cdef int[:, ::1] count = count_arr
    cdef Py_ssize_t i, j, k
    cdef double z, total
    cdef int n
    for i in range(h):
        for j in range(w):
            total = 0.0
            n = 0
            for k in range(nframes):
                z = stack[k, i, j]
                if not isfinite(z) or z <= 0.0:
                    continue
                if n == 0:
                    total = z
                    n = 1
                elif fabs(z - total / n) > jump:
                    total = z
                    n = 1
                else:
                    total = total + z
                    n = n + 1
            if n > 0:
                mean[i, j] = total / n
                count[i, j] = n
    return mean_arr, count_arr


def grid_components(const double[:, :, ::1] points,
                    const unsigned char[:, ::1] seeds,
                    double link, int connectivity):
    """Connected components of seed pixels on the image grid.

    Mirrors depthlabel._kernels_py.grid_components.
    """
    cdef Py_ssize_t h = seeds.shape[0]
    cdef Py_ssize_t w = seeds.shape[1]
    out_arr = np.full((h, w), -1, dtype=np.int32)
    cdef int[:, ::1] out = out_arr
    queue_arr = np.empty(h * w, dtype=np.int32)
    cdef int[::1] queue = queue_arr
    cdef int noffsets = 8 if connectivity == 8 else 4
    cdef int dr[8]
    cdef int dc[8]
    dr[0] = 0; dc[0] = 1
    dr[1] = 0; dc[1] = -1
    dr[2] = 1; dc[2] = 0
    dr[3] = -1; dc[3] = 0
    dr[4] = 1; dc[4] = 1
    dr[5] = 1; dc[5] = -1
    dr[6] = -1; dc[6] = 1
    dr[7] = -1; dc[7] = -1
    cdef double link2 = link * link
    cdef Py_ssize_t i, j, r, c, r2, c2, head, tail
    cdef int comp = 0
    cdef int o
    cdef double dx, dy, dz, dist2
    for i in range(h):
        for j in range(w):
            if seeds[i, j] == 0 or out[i, j] >= 0:
                continue
            head = 0
            tail = 0
            queue[tail] = <int> (i * w + j)
            tail += 1
            out[i, j] = comp
            while head < tail:
                r = queue[head] // w
                c = queue[head] % w
                head += 1
                for o in range(noffsets):
                    r2 = r + dr[o]
                    c2 = c + dc[o]
                    if r2 < 0 or r2 >= h or c2 < 0 or c2 >= w:
                        continue
                    if seeds[r2, c2] == 0 or out[r2, c2] >= 0:
                        continue
                    dx = points[r, c, 0] - points[r2, c2, 0]
                    dy = points[r, c, 1] - points[r2, c2, 1]
                    dz = points[r, c, 2] - points[r2, c2, 2]
                    dist2 = dx * dx + dy * dy + dz * dz
                    if dist2 <= link2:
                        out[r2, c2] = comp
                        queue[tail] = <int> (r2 * w + c2)
                        tail += 1
            comp += 1
    return out_arr
