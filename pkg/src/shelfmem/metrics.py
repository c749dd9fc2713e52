"""Map and belief scores: IoU, calibration error, evidential cross-entropy, object audit."""
from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.special import digamma, gammaln

from .core import BACKGROUND, EvidentialBelief, SemanticMap


def _check_dims(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def miou(pred: SemanticMap, gt: SemanticMap) -> tuple[float, float]:
    """Occupancy IoU over voxels and mean per-class IoU of the 2D class layer.

    Background is excluded from the class mean; classes absent from both
    maps are skipped. Empty-vs-empty scores 1.
    """
    _check_dims(pred.occ, gt.occ)
    inter = np.count_nonzero(pred.occ & gt.occ)
    union = np.count_nonzero(pred.occ | gt.occ)
    occ_iou = inter / union if union else 1.0
    classes = np.union1d(np.unique(pred.sem), np.unique(gt.sem))
    classes = classes[classes != BACKGROUND]
    if len(classes) == 0:
        return float(occ_iou), 1.0
    ious = []
    for c in classes:
        a, b = pred.sem == c, gt.sem == c
        ious.append(np.count_nonzero(a & b) / np.count_nonzero(a | b))
    return float(occ_iou), float(np.mean(ious))


def ece(prob: np.ndarray, outcome: np.ndarray, bins: int = 10) -> float:
    """Expected calibration error of probabilities against binary outcomes.

    Equal-width bins over [0, 1]; each bin contributes its weight times the
    gap between the observed positive rate and the mean predicted probability.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    p = np.asarray(prob, dtype=float).ravel()
    y = np.asarray(outcome, dtype=float).ravel()
    if p.size == 0:
        return 0.0
    idx = np.minimum((p * bins).astype(np.int64), bins - 1)
    n = np.bincount(idx, minlength=bins)
    sp = np.bincount(idx, weights=p, minlength=bins)
    sy = np.bincount(idx, weights=y, minlength=bins)
    keep = n > 0
    return float(np.sum(np.abs(sy[keep] - sp[keep])) / p.size)


def mece_parts(belief: EvidentialBelief, gt: SemanticMap, bins: int = 10) -> np.ndarray:
    """ECE of occupancy followed by the one-vs-rest ECE of each object class.

    Semantic terms are computed on floor cells whose true class is not
    background.
    """
    _check_dims(belief.occ_mean, gt.occ)
    parts = [ece(belief.occ_mean, gt.occ, bins)]
    fg = gt.sem != BACKGROUND
    pi = belief.sem_mean[fg]
    y = gt.sem[fg]
    for c in range(1, belief.spec.n_classes):
        parts.append(ece(pi[:, c], y == c, bins))
    return np.array(parts)


def mece(belief: EvidentialBelief, gt: SemanticMap, bins: int = 10) -> float:
    """Mean of the occupancy ECE and the per-class semantic ECEs."""
    return float(mece_parts(belief, gt, bins).mean())


def dirichlet_kl_uniform(lam) -> float:
    """KL(Dir(lam) || Dir(1, ..., 1)) in closed form."""
    a = np.asarray(lam, dtype=float)
    a0 = a.sum()
    k = a.size
    return float(gammaln(a0) - gammaln(k) - gammaln(a).sum()
                 + np.sum((a - 1.0) * (digamma(a) - digamma(a0))))


def evidential_ce(lambda_cell, y, epsilon: float = 0.0) -> float:
    """Evidential cross-entropy of one cell with a KL pull toward the flat Dirichlet.

    ``sum_j y_j (ln S - ln lambda_j) + epsilon * KL(Dir(lt) || Dir(1))`` with
    S the total evidence and ``lt = y + (1 - y) * lambda`` (true-class
    evidence removed before the KL term).
    """
    lam = np.asarray(lambda_cell, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != lam.shape or not (np.all((y == 0) | (y == 1)) and y.sum() == 1):
        raise ValueError("y must be a one-hot vector matching lambda")
    if np.any(lam < 1):
        raise ValueError("evidential parameters must be >= 1")
    S = lam.sum()
    loss = float(np.sum(y * (np.log(S) - np.log(lam))))
    if epsilon:
        loss += epsilon * dirichlet_kl_uniform(y + (1 - y) * lam)
    return loss


def belief_evidential_ce(belief: EvidentialBelief, gt: SemanticMap, epsilon: float = 0.0
                         ) -> tuple[float, float]:
    """Mean evidential cross-entropy over voxels (occupancy) and floor cells (semantics)."""
    _check_dims(belief.occ_mean, gt.occ)
    a, b = belief.alpha, belief.beta
    S = a + b
    occ = np.where(gt.occ, np.log(S) - np.log(a), np.log(S) - np.log(b))
    lam = belief.lambda_sem
    yk = np.take_along_axis(lam, gt.sem[..., None], axis=-1)[..., 0]
    sem = np.log(lam.sum(axis=-1)) - np.log(yk)
    if epsilon:
        onehot = np.zeros(2)
        occ_kl = np.empty(occ.shape)
        for idx in np.ndindex(occ.shape):
            onehot[:] = (1.0, 0.0) if gt.occ[idx] else (0.0, 1.0)
            occ_kl[idx] = dirichlet_kl_uniform(onehot + (1 - onehot) * (a[idx], b[idx]))
        occ = occ + epsilon * occ_kl
        Y = np.zeros_like(lam)
        np.put_along_axis(Y, gt.sem[..., None], 1.0, axis=-1)
        lt = Y + (1 - Y) * lam
        a0 = lt.sum(-1)
        kl = (gammaln(a0) - gammaln(lam.shape[-1]) - gammaln(lt).sum(-1)
              + np.sum((lt - 1) * (digamma(lt) - digamma(a0)[..., None]), axis=-1))
        sem = sem + epsilon * kl
    return float(occ.mean()), float(sem.mean())


def object_audit(pred: SemanticMap, scene) -> dict[str, int]:
    """Per-object found/misclassified/missing counts plus hallucinated blobs.

    An object counts as found when more than half of its footprint cells are
    occupied in ``pred``; it is correct when more than half carry its class.
    A predicted 4-connected occupied region is hallucinated when no single
    object covers at least half of it.
    """
    from .simulator import _floor_samples
    from . import geometry as geo

    spec = scene.spec
    pts = _floor_samples(spec)
    col = pred.column_occupied
    out = {"correctly_found": 0, "misclassified_found": 0, "not_found": 0, "hallucinated": 0}
    masks = []
    for o in scene.objects:
        m = geo.points_in_convex(pts, o.polygon, tol=0.0)
        masks.append(m)
        n = np.count_nonzero(m)
        if n == 0:
            out["not_found"] += 1
            continue
        occ_frac = np.count_nonzero(col & m) / n
        right = np.count_nonzero(col & m & (pred.sem == o.class_id)) / n
        if right > 0.5:
            out["correctly_found"] += 1
        elif occ_frac > 0.5:
            out["misclassified_found"] += 1
        else:
            out["not_found"] += 1
    lab, nlab = ndimage.label(col)
    for k in range(1, nlab + 1):
        comp = lab == k
        size = np.count_nonzero(comp)
        if not any(np.count_nonzero(comp & m) >= 0.5 * size for m in masks):
            out["hallucinated"] += 1
    return out


def entropy_curve(steps, key: str = "occ_entropy") -> np.ndarray:
    return np.array([s[key] for s in steps], dtype=float)
