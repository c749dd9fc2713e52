"""Independent reference implementations shared by several test modules."""
import itertools

import numpy as np

from shelfmem.core import BACKGROUND, EvidentialBelief, SemanticMap
from shelfmem.manipulation import grid_dynamics
from shelfmem.raycast import traverse_ray


def enumerate_push_posterior(belief: EvidentialBelief, push, uncertain: np.ndarray):
    """Exact pushed marginals by summing over every joint state of ``uncertain``.

    Voxels outside ``uncertain`` are taken at their rounded means, and every
    occupied column carries the argmax class of its Dirichlet. Each map is
    weighted by its product of Bernoulli probabilities and sent through the
    deterministic cell dynamics one at a time.

    Returns (occ_mean, sem_change, diff), where ``sem_change`` is the
    expected change of the one-hot column label.
    """
    spec = belief.spec
    p = belief.occ_mean
    base = p > 0.5
    cls = np.argmax(belief.lambda_sem, axis=-1)
    idx = [tuple(i) for i in np.argwhere(uncertain)]
    C = spec.n_classes
    occ_mean = np.zeros(spec.dims)
    sem_change = np.zeros(spec.shape2d + (C,))
    diff = np.zeros(spec.shape2d)
    for bits in itertools.product((False, True), repeat=len(idx)):
        occ = base.copy()
        w = 1.0
        for i, b in zip(idx, bits):
            occ[i] = b
            w *= p[i] if b else 1.0 - p[i]
        sem = np.where(occ.any(axis=2), cls, BACKGROUND)
        out = grid_dynamics(SemanticMap(occ, sem, C), push, spec)
        occ_mean += w * out.occ
        sem_change += w * (np.eye(C)[out.sem] - np.eye(C)[sem])
        changed = (out.sem != sem) | (out.occ != occ).any(axis=2)
        diff += w * changed
    return occ_mean, sem_change, diff


def slab(spec, o, d, i):
    lo = spec.lower + np.asarray(i) * spec.cell_size
    hi = lo + spec.cell_size
    with np.errstate(divide="ignore", invalid="ignore"):
        a, b = (lo - o) / d, (hi - o) / d
    t0 = np.nanmax(np.where(d != 0, np.minimum(a, b), -np.inf))
    t1 = np.nanmin(np.where(d != 0, np.maximum(a, b), np.inf))
    return max(t0, 0.0), t1


def entry_face_ok(spec, o, d):
    lo, hi = spec.lower, spec.upper
    if np.all(o >= lo) and np.all(o < hi):
        return True
    with np.errstate(divide="ignore", invalid="ignore"):
        a, b = (lo - o) / d, (hi - o) / d
    tn = np.where(d != 0, np.minimum(a, b), -np.inf)
    return int(np.argmax(tn)) == 1 and d[1] > 0


def vig_oracle(belief, views, stride=1, p_min=0.01):
    """Per-pixel visibility-weighted entropy with a dict of best visibilities."""
    spec = belief.spec
    p = belief.occ_mean
    best = {}
    for v in views:
        o, dirs = v.pixel_rays(stride)
        for d in dirs.reshape(-1, 3):
            if not entry_face_ok(spec, o, d):
                continue
            vis = 1.0
            for i in traverse_ray(spec, o, d, v.max_range):
                if vis < p_min:
                    break
                best[i] = max(best.get(i, 0.0), vis)
                vis *= 1.0 - p[i]
    total = 0.0
    for i, w in best.items():
        q = p[i]
        h = 0.0 if q in (0.0, 1.0) else -q * np.log(q) - (1 - q) * np.log(1 - q)
        total += w * h
    return total
