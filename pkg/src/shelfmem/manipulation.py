"""Manipulation belief update by explicit Monte Carlo over sampled maps.

Maps are drawn from the factorized belief, pushed through a cell-level
analog of the simulator's push dynamics, and re-marginalized into a new
evidential belief together with a per-cell change probability.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import BACKGROUND, EvidentialBelief, SemanticMap
from .push_sampler import PushAction

S_CAP = 50.0
S_MIN = 2.0
# rigid columns are those standing on the floor (objects are prisms, no stacking)
FLOOR_SUPPORT = True


@dataclass(frozen=True, eq=False)
class SampledMap(SemanticMap):
    """One concrete map drawn from a belief."""


@dataclass(frozen=True, eq=False)
class PropagationResult:
    """Post-push belief, change probability per floor cell, and the raw marginals."""

    belief: EvidentialBelief
    diff: np.ndarray
    occ_mean: np.ndarray
    sem_mean: np.ndarray


def sample_maps(belief: EvidentialBelief, n: int, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` maps: occupancy (n, H, W, D) bool and classes (n, H, W) int."""
    rng = np.random.default_rng(rng)
    p = belief.occ_mean
    occ = rng.random((n,) + p.shape) < p
    cum = np.cumsum(belief.sem_mean, axis=-1)
    u = rng.random((n,) + p.shape[:2])
    cls = (u[..., None] >= cum[None, :, :, :-1]).sum(axis=-1)
    sem = np.where(occ.any(axis=3), cls, BACKGROUND)
    return occ, sem


def sample_map(belief: EvidentialBelief, rng=None) -> SampledMap:
    """Independent per-voxel Bernoulli occupancy; occupied columns get a class draw."""
    occ, sem = sample_maps(belief, 1, rng)
    return SampledMap(occ[0], sem[0], belief.spec.n_classes)


def push_steps(push: PushAction, cell_size: float) -> np.ndarray:
    """Unit 4-neighbour moves approximating the push as a cell path, shape (S, 2)."""
    dx, dy = np.asarray(push.direction) * push.distance / cell_size
    tx, ty = int(np.round(dx)), int(np.round(dy))
    sx, sy = int(np.sign(tx)), int(np.sign(ty))
    nx, ny = abs(tx), abs(ty)
    steps = []
    done_x = done_y = 0
    while done_x < nx or done_y < ny:
        fx = (done_x + 0.5) / nx if done_x < nx else np.inf
        fy = (done_y + 0.5) / ny if done_y < ny else np.inf
        if fx <= fy:
            steps.append((sx, 0))
            done_x += 1
        else:
            steps.append((0, sy))
            done_y += 1
    return np.asarray(steps, dtype=np.int64).reshape(-1, 2)


@njit(cache=True)
def _label4(colocc):
    H, W = colocc.shape
    lab = np.full((H, W), -1, np.int64)
    stack = np.empty((H * W, 2), np.int64)
    n = 0
    for i0 in range(H):
        for j0 in range(W):
            if not colocc[i0, j0] or lab[i0, j0] >= 0:
                continue
            lab[i0, j0] = n
            top = 0
            stack[0, 0] = i0
            stack[0, 1] = j0
            top = 1
            while top > 0:
                top -= 1
                i = stack[top, 0]
                j = stack[top, 1]
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    a = i + di
                    b = j + dj
                    if 0 <= a < H and 0 <= b < W and colocc[a, b] and lab[a, b] < 0:
                        lab[a, b] = n
                        stack[top, 0] = a
                        stack[top, 1] = b
                        top += 1
            n += 1
    return lab, n


@njit(cache=True)
def _column_displacements(colocc, contact, passive, pusher, steps):
    """Per-column integer displacement produced by the stepped push.

    ``colocc`` marks rigid columns, ``passive`` marks columns whose content
    does not rest on the floor. Passive content never blocks or transmits a
    push; a rigid column entering its cell displaces it to the cell the
    moving set vacates at the back of the same line.
    """
    H, W = colocc.shape
    lab, nc = _label4(colocc)
    # cells of each component (CSR)
    size = np.zeros(nc + 1, np.int64)
    for i in range(H):
        for j in range(W):
            if lab[i, j] >= 0:
                size[lab[i, j] + 1] += 1
    ptr = np.cumsum(size)
    fill = ptr[:-1].copy()
    ci = np.empty(ptr[-1], np.int64)
    cj = np.empty(ptr[-1], np.int64)
    for i in range(H):
        for j in range(W):
            c = lab[i, j]
            if c >= 0:
                ci[fill[c]] = i
                cj[fill[c]] = j
                fill[c] += 1
    disp = np.zeros((nc, 2), np.int64)
    cur = lab.copy()
    cur_contact = contact.copy()
    # passive content: current owner (flat index of its original cell) per cell
    pcur = np.full((H, W), -1, np.int64)
    for i in range(H):
        for j in range(W):
            if passive[i, j]:
                pcur[i, j] = i * W + j
    moving = np.zeros(nc, np.bool_)
    moving_old = np.zeros((H, W), np.bool_)
    queue = np.empty(nc, np.int64)
    ox = 0
    oy = 0
    for s in range(steps.shape[0]):
        ux = steps[s, 0]
        uy = steps[s, 1]
        ox += ux
        oy += uy
        moving[:] = False
        qn = 0
        for p in range(pusher.shape[0]):
            a = pusher[p, 0] + ox
            b = pusher[p, 1] + oy
            if 0 <= a < H and 0 <= b < W:
                c = cur[a, b]
                if c >= 0 and cur_contact[a, b] and not moving[c]:
                    moving[c] = True
                    queue[qn] = c
                    qn += 1
        blocked = False
        q = 0
        while q < qn and not blocked:
            c = queue[q]
            q += 1
            for k in range(ptr[c], ptr[c + 1]):
                a = ci[k] + disp[c, 0] + ux
                b = cj[k] + disp[c, 1] + uy
                if a < 0 or a >= H or b < 0 or b >= W:
                    blocked = True
                    break
                c2 = cur[a, b]
                if c2 >= 0 and not moving[c2]:
                    moving[c2] = True
                    queue[qn] = c2
                    qn += 1
        if blocked:
            break
        moving_old[:, :] = False
        for q in range(qn):
            c = queue[q]
            for k in range(ptr[c], ptr[c + 1]):
                moving_old[ci[k] + disp[c, 0], cj[k] + disp[c, 1]] = True
        # displace passive content out of the cells the moving set enters
        for q in range(qn):
            c = queue[q]
            for k in range(ptr[c], ptr[c + 1]):
                a0 = ci[k] + disp[c, 0]
                b0 = cj[k] + disp[c, 1]
                a = a0 + ux
                b = b0 + uy
                if moving_old[a, b] or pcur[a, b] < 0:
                    continue
                va = a0
                vb = b0
                while 0 <= va - ux < H and 0 <= vb - uy < W and moving_old[va - ux, vb - uy]:
                    va -= ux
                    vb -= uy
                pcur[va, vb] = pcur[a, b]
                pcur[a, b] = -1
        for q in range(qn):
            c = queue[q]
            for k in range(ptr[c], ptr[c + 1]):
                cur[ci[k] + disp[c, 0], cj[k] + disp[c, 1]] = -1
        for q in range(qn):
            c = queue[q]
            disp[c, 0] += ux
            disp[c, 1] += uy
            for k in range(ptr[c], ptr[c + 1]):
                a = ci[k] + disp[c, 0]
                b = cj[k] + disp[c, 1]
                cur[a, b] = c
                cur_contact[a, b] = contact[ci[k], cj[k]]
    out = np.zeros((H, W, 2), np.int64)
    for i in range(H):
        for j in range(W):
            c = lab[i, j]
            if c >= 0:
                out[i, j, 0] = disp[c, 0]
                out[i, j, 1] = disp[c, 1]
            o = pcur[i, j]
            if o >= 0:
                out[o // W, o % W, 0] = i - o // W
                out[o // W, o % W, 1] = j - o % W
    return out


@njit(cache=True)
def _dynamics_batch(occ, sem, layer, pusher, steps, floor_support):
    n, H, W, D = occ.shape
    new_occ = np.zeros_like(occ)
    new_sem = np.zeros_like(sem)
    changed = np.zeros((n, H, W), np.bool_)
    colocc = np.zeros((H, W), np.bool_)
    passive = np.zeros((H, W), np.bool_)
    anyocc = np.zeros((H, W), np.bool_)
    contact = np.zeros((H, W), np.bool_)
    for s in range(n):
        for i in range(H):
            for j in range(W):
                any_occ = False
                high = False
                for l in range(D):
                    if occ[s, i, j, l]:
                        any_occ = True
                        if l >= layer:
                            high = True
                anyocc[i, j] = any_occ
                rigid = occ[s, i, j, 0] if floor_support else any_occ
                colocc[i, j] = rigid
                passive[i, j] = any_occ and not rigid
                contact[i, j] = high and rigid
        disp = _column_displacements(colocc, contact, passive, pusher, steps)
        for i in range(H):
            for j in range(W):
                if anyocc[i, j]:
                    a = i + disp[i, j, 0]
                    b = j + disp[i, j, 1]
                    for l in range(D):
                        new_occ[s, a, b, l] = occ[s, i, j, l]
                    new_sem[s, a, b] = sem[s, i, j]
        for i in range(H):
            for j in range(W):
                if new_sem[s, i, j] != sem[s, i, j]:
                    changed[s, i, j] = True
                    continue
                for l in range(D):
                    if new_occ[s, i, j, l] != occ[s, i, j, l]:
                        changed[s, i, j] = True
                        break
    return new_occ, new_sem, changed


def _push_inputs(spec, push: PushAction):
    return push.push_layer(spec), push.pusher_cells(spec), push_steps(push, spec.cell_size)


def dynamics_batch(spec, occ: np.ndarray, sem: np.ndarray, push: PushAction,
                   floor_support: bool = FLOOR_SUPPORT):
    """Apply the cell-level push to a stack of maps; also returns changed cells."""
    layer, pusher, steps = _push_inputs(spec, push)
    return _dynamics_batch(np.ascontiguousarray(occ, dtype=np.bool_),
                           np.ascontiguousarray(sem, dtype=np.int64), layer, pusher, steps,
                           floor_support)


def grid_dynamics(m: SemanticMap, push: PushAction, spec) -> SampledMap:
    """Cell-level push on one map.

    Occupied floor columns form 4-connected components; components the
    pusher plate runs into (at or above the push height) move one cell per
    step along the quantized path and recruit every component they run
    into. The whole push halts the first time a moving cell would leave the
    grid. Column profiles and labels travel with their columns.
    """
    occ, sem, _ = dynamics_batch(spec, m.occ[None], m.sem[None], push)
    return SampledMap(occ[0], sem[0], spec.n_classes)


def evidential_from_mean(mean: np.ndarray, prior_strength: np.ndarray, d: np.ndarray,
                         s_cap: float = S_CAP, s_min: float = S_MIN) -> np.ndarray:
    """Turn probabilities into evidential parameters with change-aware strength.

    Strength is min(prior, s_cap) where nothing changed, blended linearly to
    ``s_min`` as the change probability ``d`` goes to one; parameters are
    floored at one.
    """
    s = np.minimum(prior_strength, s_cap) * (1.0 - d) + s_min * d
    return np.maximum(mean * s[..., None], 1.0)


def update_manipulation(belief: EvidentialBelief, push: PushAction, n_samples: int = 32,
                        rng=None) -> PropagationResult:
    """Monte Carlo belief prediction for a push (no observation).

    The occupancy marginal is estimated as the prior marginal plus the mean
    per-sample change, an unbiased estimator of the pushed marginal that is
    exact wherever no sample changed. Semantic means are handled the same
    way on one-hot labels.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    spec = belief.spec
    occ, sem = sample_maps(belief, n_samples, rng)
    new_occ, new_sem, changed = dynamics_batch(spec, occ, sem, push)

    d = changed.mean(axis=0)
    p0 = belief.occ_mean
    delta = (new_occ.sum(axis=0, dtype=np.int64) - occ.sum(axis=0, dtype=np.int64)) / n_samples
    occ_mean = np.clip(p0 + delta, 0.0, 1.0)

    C = spec.n_classes
    H, W = spec.shape2d
    flat = np.arange(H * W)
    before = np.zeros((H * W, C))
    after = np.zeros((H * W, C))
    for s in range(n_samples):
        np.add.at(before, (flat, sem[s].reshape(-1)), 1.0)
        np.add.at(after, (flat, new_sem[s].reshape(-1)), 1.0)
    sem_mean = belief.sem_mean + ((after - before) / n_samples).reshape(H, W, C)
    sem_mean = np.clip(sem_mean, 0.0, None)
    sem_mean /= sem_mean.sum(axis=-1, keepdims=True)

    occ_pm = np.stack([occ_mean, 1.0 - occ_mean], axis=-1)
    lam_occ = evidential_from_mean(occ_pm, belief.occ_strength, d[:, :, None])
    lam_sem = evidential_from_mean(sem_mean, belief.sem_strength, d)
    return PropagationResult(belief.replace(lam_occ, lam_sem), d, occ_mean, sem_mean)
