"""Observation belief update: exact evidence accumulation from depth + label images."""
from __future__ import annotations

import numpy as np
from numba import njit

from .core import BACKGROUND, EvidentialBelief
from .raycast import FRONT_FACE, STARTED_INSIDE, march_rays

K_FREE = 1.0
K_OCC = 4.0
K_SEM = 4.0
_EPS = 1e-7
_FLOOR_FACE = 4  # z = z_min


@njit(cache=True)
def _evidence_masks(idx, t0, t1, counts, entry, exit_face, depth, labels, max_range,
                    dims, n_classes):
    H, W, D = dims[0], dims[1], dims[2]
    free = np.zeros((H, W, D), np.bool_)
    hit = np.zeros((H, W, D), np.bool_)
    sem = np.zeros((H, W, n_classes), np.bool_)
    for r in range(counts.shape[0]):
        e = entry[r]
        if e != FRONT_FACE and e != STARTED_INSIDE:
            continue
        n = counts[r]
        d = depth[r]
        no_return = not np.isfinite(d)
        limit = max_range if no_return else d
        for k in range(n):
            i, j, l = idx[r, k, 0], idx[r, k, 1], idx[r, k, 2]
            if t1[r, k] <= limit + _EPS:
                free[i, j, l] = True
                continue
            if not no_return and t0[r, k] <= d + _EPS:
                hit[i, j, l] = True
                sem[i, j, labels[r]] = True
            break
        else:
            # return point lies beyond the last voxel: a wall; label the floor column
            if not no_return and n > 0 and exit_face[r] == _FLOOR_FACE \
                    and abs(t1[r, n - 1] - d) <= 1e-6:
                sem[idx[r, n - 1, 0], idx[r, n - 1, 1], labels[r]] = True
    return free, hit, sem


def evidence_masks(spec, obs):
    """Voxels carved free, voxels hit, and (column, label) pairs seen in one image."""
    v = obs.viewpoint
    origin, dirs = v.pixel_rays(1)
    depth = obs.depth.reshape(-1)
    labels = obs.labels.reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= spec.n_classes):
        raise ValueError("label out of range")
    rb = march_rays(spec, origin, dirs.reshape(-1, 3), v.max_range)
    return _evidence_masks(rb.idx, rb.t0, rb.t1, rb.counts, rb.entry, rb.exit_face,
                           depth, labels, float(v.max_range), np.asarray(spec.dims, np.int64),
                           spec.n_classes)


def update_observation(belief: EvidentialBelief, obs, k_free: float = K_FREE,
                       k_occ: float = K_OCC, k_sem: float = K_SEM) -> EvidentialBelief:
    """Integrate one posed depth + label image.

    Every voxel a pixel ray crosses before its return gains ``k_free`` on
    beta, the voxel holding the return gains ``k_occ`` on alpha and its floor
    column gains ``k_sem`` for the pixel's label. Pixels without a return carve
    free space up to the sensor range. Each voxel (and each column/label pair)
    is credited at most once per image however many rays reach it.
    """
    v = obs.viewpoint
    if obs.depth.shape != (v.height, v.width):
        raise ValueError("malformed image dims")
    free, hit, sem = evidence_masks(belief.spec, obs)
    occ = belief.lambda_occ.copy()
    occ[..., 0] += k_occ * hit
    occ[..., 1] += k_free * free
    lam_sem = belief.lambda_sem + k_sem * sem
    return belief.replace(lambda_occ=occ, lambda_sem=lam_sem)
