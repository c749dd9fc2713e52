"""Exact voxel traversal (incremental grid marching) for batches of rays."""
from __future__ import annotations

import numpy as np
from numba import njit

from .core import GridSpec

# face codes: 2 * axis + (0 for the lower face, 1 for the upper face)
MISS = -2
STARTED_INSIDE = -1
FRONT_FACE = 2  # y = y_min, the shelf opening


@njit(cache=True)
def _march_one(o, d, t_max, lo, cell, dims, out_idx, out_t0, out_t1):
    """March one ray; returns (count, entry_face, exit_face, t_entry).

    exit_face is -1 when the march stopped at t_max instead of leaving the grid.
    """
    hi = np.empty(3)
    for a in range(3):
        hi[a] = lo[a] + dims[a] * cell
    t_near = -np.inf
    t_far = np.inf
    near_face = STARTED_INSIDE
    for a in range(3):
        if d[a] == 0.0:
            if o[a] < lo[a] or o[a] > hi[a]:
                return 0, MISS, -1, np.inf
            continue
        t1 = (lo[a] - o[a]) / d[a]
        t2 = (hi[a] - o[a]) / d[a]
        face_lo = 2 * a
        if t1 > t2:
            t1, t2 = t2, t1
            face_lo = 2 * a + 1
        if t1 > t_near:
            t_near = t1
            near_face = face_lo
        if t2 < t_far:
            t_far = t2
    if t_near > t_far or t_far < 0.0:
        return 0, MISS, -1, np.inf
    if t_near <= 0.0:
        t_start = 0.0
        entry = STARTED_INSIDE
    else:
        t_start = t_near
        entry = near_face
    if t_start > t_max:
        return 0, entry, -1, t_start

    idx = np.empty(3, np.int64)
    step = np.empty(3, np.int64)
    t_next = np.empty(3)
    t_delta = np.empty(3)
    for a in range(3):
        p = o[a] + t_start * d[a]
        i = int(np.floor((p - lo[a]) / cell))
        if i < 0:
            i = 0
        if i > dims[a] - 1:
            i = dims[a] - 1
        idx[a] = i
        if d[a] > 0.0:
            step[a] = 1
            t_next[a] = (lo[a] + (i + 1) * cell - o[a]) / d[a]
            t_delta[a] = cell / d[a]
        elif d[a] < 0.0:
            step[a] = -1
            t_next[a] = (lo[a] + i * cell - o[a]) / d[a]
            t_delta[a] = -cell / d[a]
        else:
            step[a] = 0
            t_next[a] = np.inf
            t_delta[a] = np.inf

    n = 0
    t_cur = t_start
    cap = out_idx.shape[0]
    exit_face = -1
    while n < cap:
        # axis with the smallest crossing time; ties go to the lowest axis
        ax = 0
        if t_next[1] < t_next[ax]:
            ax = 1
        if t_next[2] < t_next[ax]:
            ax = 2
        t_leave = t_next[ax]
        out_idx[n, 0] = idx[0]
        out_idx[n, 1] = idx[1]
        out_idx[n, 2] = idx[2]
        out_t0[n] = t_cur
        out_t1[n] = t_leave
        n += 1
        if t_leave > t_max:
            break
        idx[ax] += step[ax]
        t_cur = t_leave
        t_next[ax] += t_delta[ax]
        if idx[ax] < 0 or idx[ax] >= dims[ax]:
            exit_face = 2 * ax + (1 if step[ax] > 0 else 0)
            break
    return n, entry, exit_face, t_start


@njit(cache=True)
def _march_batch(origins, dirs, t_max, lo, cell, dims, max_steps):
    R = dirs.shape[0]
    idx = np.full((R, max_steps, 3), -1, np.int64)
    t0 = np.full((R, max_steps), np.inf)
    t1 = np.full((R, max_steps), np.inf)
    counts = np.zeros(R, np.int64)
    entry = np.zeros(R, np.int64)
    exit_face = np.zeros(R, np.int64)
    t_entry = np.zeros(R)
    for r in range(R):
        n, e, x, te = _march_one(origins[r], dirs[r], t_max[r], lo, cell, dims,
                                 idx[r], t0[r], t1[r])
        counts[r] = n
        entry[r] = e
        exit_face[r] = x
        t_entry[r] = te
    return idx, t0, t1, counts, entry, exit_face, t_entry


class RayBatch:
    """Result of marching many rays: padded per-ray voxel sequences."""

    def __init__(self, idx, t0, t1, counts, entry, exit_face, t_entry):
        self.idx = idx
        self.t0 = t0
        self.t1 = t1
        self.counts = counts
        self.entry = entry
        self.exit_face = exit_face
        self.t_entry = t_entry

    def __len__(self):
        return len(self.counts)


def march_rays(spec: GridSpec, origins, dirs, max_range) -> RayBatch:
    """March a batch of rays through ``spec``'s grid.

    Args:
        origins: (R, 3) or (3,) ray origins.
        dirs: (R, 3) ray directions; need not be unit, ``t`` is in their units.
        max_range: scalar or (R,) maximum ray parameter.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    R = dirs.shape[0]
    origins = np.broadcast_to(np.asarray(origins, dtype=float), (R, 3)).copy()
    t_max = np.broadcast_to(np.asarray(max_range, dtype=float), (R,)).copy()
    max_steps = int(sum(spec.dims)) + 3
    out = _march_batch(origins, np.ascontiguousarray(dirs), t_max, spec.lower, float(spec.cell_size),
                       np.asarray(spec.dims, dtype=np.int64), max_steps)
    return RayBatch(*out)


def traverse_ray(spec: GridSpec, origin, direction, max_range: float) -> list[tuple[int, int, int]]:
    """Voxels crossed by the segment ``origin + t * direction``, t in [0, max_range].

    Voxels come in order of increasing distance, each once; consecutive
    voxels differ by one step along a single axis.
    """
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,) or not np.any(d != 0) or not np.all(np.isfinite(d)):
        raise ValueError("direction must be a finite non-zero 3-vector")
    d = d / np.linalg.norm(d)
    rb = march_rays(spec, np.asarray(origin, dtype=float)[None], d[None], max_range)
    n = int(rb.counts[0])
    return [tuple(int(v) for v in rb.idx[0, k]) for k in range(n)]
