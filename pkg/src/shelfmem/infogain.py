"""Occlusion-aware volumetric information gain and the semantic-entropy regularizer."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numba import njit

from .core import EvidentialBelief, GridSpec, Viewpoint, bernoulli_entropy, semantic_entropy
from .manipulation import PropagationResult, update_manipulation
from .raycast import FRONT_FACE, STARTED_INSIDE, march_rays

P_VIS_MIN = 0.01
DEFAULT_STRIDE = 4
# gains closer than this are ties (near-certain beliefs leave ~1e-13 nats per voxel)
TIE_TOL = 1e-9


@lru_cache(maxsize=4096)
def view_rays(spec: GridSpec, v: Viewpoint, stride: int = DEFAULT_STRIDE):
    """Flat voxel indices crossed by each sampled pixel ray, as CSR (ptr, vox).

    Only rays that enter through the shelf opening (or start inside the grid)
    contribute; any other ray is stopped by the shelf shell before it sees a
    voxel.
    """
    origin, dirs = v.pixel_rays(stride)
    rb = march_rays(spec, origin, dirs.reshape(-1, 3), v.max_range)
    ok = (rb.entry == FRONT_FACE) | (rb.entry == STARTED_INSIDE)
    counts = np.where(ok, rb.counts, 0)
    H, W, D = spec.dims
    ptr = np.zeros(len(counts) + 1, np.int64)
    ptr[1:] = np.cumsum(counts)
    vox = np.empty(ptr[-1], np.int64)
    for r in np.flatnonzero(counts):
        i = rb.idx[r, :counts[r]]
        vox[ptr[r]:ptr[r + 1]] = (i[:, 0] * W + i[:, 1]) * D + i[:, 2]
    ptr.flags.writeable = False
    vox.flags.writeable = False
    return ptr, vox


@njit(cache=True)
def _max_visibility(ptr, vox, p, out, p_min):
    for r in range(ptr.shape[0] - 1):
        vis = 1.0
        for k in range(ptr[r], ptr[r + 1]):
            if vis < p_min:
                break
            x = vox[k]
            if vis > out[x]:
                out[x] = vis
            vis *= 1.0 - p[x]


def visibility_weights(belief: EvidentialBelief, views, stride: int = DEFAULT_STRIDE,
                       p_min: float = P_VIS_MIN) -> np.ndarray:
    """Per-voxel maximum visibility probability over all rays of ``views`` (flat)."""
    if stride < 1:
        raise ValueError("ray_stride must be >= 1")
    p = np.ascontiguousarray(belief.occ_mean.reshape(-1))
    w = np.zeros(p.size)
    for v in views:
        ptr, vox = view_rays(belief.spec, v, stride)
        _max_visibility(ptr, vox, p, w, p_min)
    return w


def _entropy_flat(belief: EvidentialBelief) -> np.ndarray:
    return bernoulli_entropy(belief.occ_mean).reshape(-1)


def view_gain(belief: EvidentialBelief, v: Viewpoint, ray_stride: int = DEFAULT_STRIDE,
              p_min: float = P_VIS_MIN) -> float:
    """Sum over voxels of (max visibility along any ray of ``v``) x occupancy entropy."""
    w = visibility_weights(belief, [v], ray_stride, p_min)
    return float(np.dot(w, _entropy_flat(belief)))


def pair_gain(belief: EvidentialBelief, v1: Viewpoint, v2: Viewpoint,
              ray_stride: int = DEFAULT_STRIDE, p_min: float = P_VIS_MIN) -> float:
    """Gain of two views with every voxel counted once at its best visibility."""
    w = visibility_weights(belief, [v1, v2], ray_stride, p_min)
    return float(np.dot(w, _entropy_flat(belief)))


def weight_matrix(belief: EvidentialBelief, views, ray_stride: int = DEFAULT_STRIDE,
                  p_min: float = P_VIS_MIN) -> np.ndarray:
    """Visibility weights (n_views, n_voxels) with one row per view."""
    return np.stack([visibility_weights(belief, [v], ray_stride, p_min) for v in views])


@njit(cache=True)
def _pair_table(Wm, h):
    n = Wm.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for k in range(h.shape[0]):
                a = Wm[i, k]
                b = Wm[j, k]
                s += (a if a > b else b) * h[k]
            out[i, j] = s
            out[j, i] = s
    return out


def pair_gain_table(belief: EvidentialBelief, views, ray_stride: int = DEFAULT_STRIDE,
                    p_min: float = P_VIS_MIN) -> np.ndarray:
    """Symmetric matrix of pair gains; the diagonal holds single-view gains."""
    h = _entropy_flat(belief)
    Wm = weight_matrix(belief, views, ray_stride, p_min)
    keep = (h > 0) & (Wm.max(axis=0) > 0)
    return _pair_table(np.ascontiguousarray(Wm[:, keep]), np.ascontiguousarray(h[keep]))


def best_view_pair(belief: EvidentialBelief, views, ray_stride: int = DEFAULT_STRIDE,
                   p_min: float = P_VIS_MIN) -> tuple[int, int, float]:
    """Most informative pair of distinct views, as (view now, view next, IGV).

    Pair gain is symmetric, so the maximization runs over i < j with ties
    (within ``TIE_TOL``) going to the lexicographically smallest pair. Of the
    winning pair, the view with the larger single gain is taken first.
    """
    n = len(views)
    if n < 2:
        raise ValueError("need at least two views")
    T = pair_gain_table(belief, views, ray_stride, p_min)
    iu, ju = np.triu_indices(n, k=1)
    vals = T[iu, ju]
    k = int(np.flatnonzero(vals >= vals.max() - TIE_TOL)[0])
    i, j = int(iu[k]), int(ju[k])
    if T[j, j] > T[i, i] + TIE_TOL:
        i, j = j, i
    return i, j, float(vals[k])


@lru_cache(maxsize=64)
def _stacked_rays(spec: GridSpec, views: tuple, stride: int):
    parts = [view_rays(spec, v, stride) for v in views]
    vptr = np.zeros(len(parts) + 1, np.int64)
    ptrs, voxs, off = [], [], 0
    for k, (ptr, vox) in enumerate(parts):
        ptrs.append(ptr[:-1] + off)
        voxs.append(vox)
        off += len(vox)
        vptr[k + 1] = vptr[k] + len(ptr) - 1
    ptr = np.concatenate(ptrs + [np.array([off], np.int64)])
    return vptr, ptr, np.concatenate(voxs)


@njit(cache=True)
def _gains_per_view(vptr, ptr, vox, p, h, p_min):
    n_views = vptr.shape[0] - 1
    gains = np.zeros(n_views)
    w = np.zeros(p.shape[0])
    touched = np.empty(vox.shape[0], np.int64)
    for v in range(n_views):
        nt = 0
        for r in range(vptr[v], vptr[v + 1]):
            vis = 1.0
            for k in range(ptr[r], ptr[r + 1]):
                if vis < p_min:
                    break
                x = vox[k]
                if w[x] == 0.0:
                    touched[nt] = x
                    nt += 1
                if vis > w[x]:
                    w[x] = vis
                vis *= 1.0 - p[x]
        g = 0.0
        for q in range(nt):
            x = touched[q]
            g += w[x] * h[x]
            w[x] = 0.0
        gains[v] = g
    return gains


def view_gains(belief: EvidentialBelief, views, ray_stride: int = DEFAULT_STRIDE,
               p_min: float = P_VIS_MIN) -> np.ndarray:
    """Single-view gain of every view in one pass."""
    if ray_stride < 1:
        raise ValueError("ray_stride must be >= 1")
    vptr, ptr, vox = _stacked_rays(belief.spec, tuple(views), ray_stride)
    p = np.ascontiguousarray(belief.occ_mean.reshape(-1))
    return _gains_per_view(vptr, ptr, vox, p, _entropy_flat(belief), p_min)


def best_single_view(belief: EvidentialBelief, views, ray_stride: int = DEFAULT_STRIDE,
                     p_min: float = P_VIS_MIN) -> tuple[int, float]:
    gains = view_gains(belief, views, ray_stride, p_min)
    k = int(np.argmax(gains))
    return k, float(gains[k])


def _push_rng(base: int, push) -> np.random.Generator:
    """Sample stream keyed by the push itself, so scores do not depend on list order."""
    key = np.array([*push.start, *push.direction, push.distance], dtype=np.float64)
    return np.random.default_rng([base, *key.view(np.uint64).tolist()])


def best_push(belief: EvidentialBelief, pushes, views, n_samples: int = 32, rng=None,
              ray_stride: int = DEFAULT_STRIDE, p_min: float = P_VIS_MIN
              ) -> tuple[int, int, float, PropagationResult]:
    """Most informative push followed by one view, as (push idx, view idx, IGM, prediction).

    Each push is scored by predicting the post-push belief and taking the
    best single-view gain on it. Ties go to the lowest push index. Each push
    gets its own sample stream derived from ``rng`` and its parameters.
    """
    if len(pushes) == 0:
        raise ValueError("no candidate pushes")
    rng = np.random.default_rng(rng)
    base = int(rng.integers(0, 2**63 - 1))
    best = (-1, -1, -np.inf, None)
    for i, push in enumerate(pushes):
        pred = update_manipulation(belief, push, n_samples, _push_rng(base, push))
        v, g = best_single_view(pred.belief, views, ray_stride, p_min)
        if g > best[2]:
            best = (i, v, g, pred)
    return best


def reg_term(belief_before: EvidentialBelief, belief_after: EvidentialBelief) -> float:
    """Semantic entropy before minus after; negative when the map gets less certain."""
    if belief_before.lambda_sem.shape != belief_after.lambda_sem.shape:
        raise ValueError("belief dims differ")
    return semantic_entropy(belief_before) - semantic_entropy(belief_after)
