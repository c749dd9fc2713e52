"""Push actions and candidate-push generation from the occupancy belief."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .core import EvidentialBelief, GridSpec

GRIPPER_WIDTH = 0.08
PUSHER_THICKNESS = 0.02
MIN_DISTANCE, MAX_DISTANCE = 0.05, 0.15

FREE_P, FREE_STRENGTH = 0.2, 4.0
LIKELY_OCC_P = 0.6
BLOCKING_P = 0.8
FRONTIER_DEPTH = 3
TARGET_RADIUS = 0.1


@dataclass(frozen=True)
class PushAction:
    """Straight-line push of a flat pusher.

    The pusher is a ``GRIPPER_WIDTH``-wide plate, ``PUSHER_THICKNESS`` deep,
    whose leading edge is centered on ``start`` and which travels
    ``distance`` along the horizontal unit vector ``direction``. It acts on
    everything at or above ``push_height`` (``start[2]``).
    """

    start: tuple[float, float, float]
    direction: tuple[float, float]
    distance: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if d.shape != (2,) or n < 1e-12:
            raise ValueError("direction must be a non-zero 2D vector")
        if self.distance < 0:
            raise ValueError("distance must be non-negative")
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "direction", tuple(float(v) for v in d / n))
        object.__setattr__(self, "distance", float(self.distance))

    @property
    def push_height(self) -> float:
        return self.start[2]

    @property
    def dir(self) -> np.ndarray:
        return np.asarray(self.direction)

    def pusher_polygon(self, advance: float = 0.0) -> np.ndarray:
        d = self.dir
        n = np.array([-d[1], d[0]])
        lead = np.asarray(self.start[:2]) + advance * d
        back = lead - PUSHER_THICKNESS * d
        w = GRIPPER_WIDTH / 2
        return np.array([back - w * n, lead - w * n, lead + w * n, back + w * n])

    def swept_polygon(self) -> np.ndarray:
        return geo.convex_hull(np.concatenate([self.pusher_polygon(0.0),
                                               self.pusher_polygon(self.distance)]))

    def push_layer(self, spec: GridSpec) -> int:
        k = int(np.floor((self.push_height - spec.origin[2]) / spec.cell_size))
        return min(max(k, 0), spec.dims[2] - 1)

    def swept_cells(self, spec: GridSpec) -> np.ndarray:
        """Floor cells covered by the swept pusher (never empty)."""
        xs = spec.origin[0] + (np.arange(spec.dims[0]) + 0.5) * spec.cell_size
        ys = spec.origin[1] + (np.arange(spec.dims[1]) + 0.5) * spec.cell_size
        mask = geo.raster_centers(self.swept_polygon(), xs, ys)
        i, j = spec.world_to_index(np.asarray(self.start))[:2]
        if not mask.any() and 0 <= i < spec.dims[0] and 0 <= j < spec.dims[1]:
            mask[i, j] = True
        return mask

    def swept_voxels(self, spec: GridSpec) -> np.ndarray:
        cells = self.swept_cells(spec)
        vox = np.zeros(spec.dims, dtype=bool)
        vox[:, :, self.push_layer(spec):] = cells[:, :, None]
        return vox

    def pusher_cells(self, spec: GridSpec) -> np.ndarray:
        """Floor cells of the pusher plate at its start pose, shape (P, 2).

        The plate is rasterized one cell deep so that a thin plate always
        occupies a contiguous row of cells.
        """
        d = self.dir
        n = np.array([-d[1], d[0]])
        lead = np.asarray(self.start[:2])
        back = lead - spec.cell_size * d
        w = GRIPPER_WIDTH / 2
        poly = np.array([back - w * n, lead - w * n, lead + w * n, back + w * n])
        xs = spec.origin[0] + (np.arange(spec.dims[0]) + 0.5) * spec.cell_size
        ys = spec.origin[1] + (np.arange(spec.dims[1]) + 0.5) * spec.cell_size
        # slight inflation so cell centers on the plate boundary are kept
        c = poly.mean(axis=0)
        mask = geo.raster_centers(c + (poly - c) * (1 + 1e-9), xs, ys)
        cells = np.argwhere(mask)
        start_cell = spec.world_to_index(np.asarray(self.start))[:2]
        if not any((cells == start_cell).all(axis=1)):
            cells = np.vstack([cells, start_cell[None]])
        return cells.astype(np.int64)

    def is_sampled_valid(self) -> bool:
        return MIN_DISTANCE - 1e-12 <= self.distance <= MAX_DISTANCE + 1e-12

    def to_dict(self) -> dict:
        return {"start": list(self.start), "direction": list(self.direction),
                "distance": self.distance}

    @classmethod
    def from_dict(cls, d: dict) -> "PushAction":
        return cls(tuple(d["start"]), tuple(d["direction"]), float(d["distance"]))


def _entrance_free(belief: EvidentialBelief) -> np.ndarray:
    """Confidently free voxels connected to the opening along straight depth lines."""
    p = belief.occ_mean
    free = (p < FREE_P) & (belief.occ_strength >= FREE_STRENGTH)
    return np.cumprod(free, axis=1).astype(bool)


def _likely_ahead(belief: EvidentialBelief, depth: int = FRONTIER_DEPTH) -> np.ndarray:
    occ = belief.occ_mean > LIKELY_OCC_P
    ahead = np.zeros_like(occ)
    for k in range(1, depth + 1):
        ahead[:, :-k, :] |= occ[:, k:, :]
    return ahead


def frontier_mask(belief: EvidentialBelief) -> np.ndarray:
    """Voxel mask of high-confidence frontier points reachable from the opening.

    A frontier voxel is confidently free (mean < 0.2, evidence >= 4), lies on a
    straight free line from the opening plane, and has a likely-occupied voxel
    (mean > 0.6) at most three cells deeper.
    """
    return _entrance_free(belief) & _likely_ahead(belief)


def frontier_points(belief: EvidentialBelief) -> np.ndarray:
    """World coordinates (N, 3) of frontier voxel centers, sorted by x, then y, z."""
    idx = np.argwhere(frontier_mask(belief))
    pts = belief.spec.index_to_world_center(idx) if len(idx) else np.zeros((0, 3))
    if len(pts):
        order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
        pts = pts[order]
    return pts


def _feasible(belief: EvidentialBelief, push: PushAction, blocking: np.ndarray) -> bool:
    """Straight-in approach from the opening plus a collision-free start pose."""
    spec = belief.spec
    cells = push.pusher_cells(spec)
    k = push.push_layer(spec)
    H, W, _ = spec.dims
    for i, j in cells:
        if not (0 <= i < H and 0 <= j < W):
            continue
        # the corridor from the opening to the start pose must be clear
        if blocking[i, : j + 1, k:].any():
            return False
    return True


def sample_pushes(belief: EvidentialBelief, k: int = 20, rng=None) -> list[PushAction]:
    """Up to ``k`` feasible pushes, each from a distinct frontier point.

    Start points are drawn uniformly without replacement from the frontier;
    each points toward a likely-occupied voxel within ``TARGET_RADIUS`` and
    gets a distance drawn uniformly from [0.05, 0.15] m.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(rng)
    spec = belief.spec
    pts = frontier_points(belief)
    if len(pts) == 0:
        return []
    p = belief.occ_mean
    likely = np.argwhere(p > LIKELY_OCC_P)
    likely_w = spec.index_to_world_center(likely)
    blocking = p > BLOCKING_P
    pushes: list[PushAction] = []
    for i in rng.permutation(len(pts)):
        start = pts[i]
        dist = np.linalg.norm(likely_w - start, axis=1)
        near = np.flatnonzero(dist <= TARGET_RADIUS)
        if len(near) == 0:
            continue
        target = likely_w[near[rng.integers(len(near))]]
        d = target[:2] - start[:2]
        if np.linalg.norm(d) < 1e-9:
            continue
        push = PushAction(tuple(start), tuple(d), float(rng.uniform(MIN_DISTANCE, MAX_DISTANCE)))
        if not _feasible(belief, push, blocking):
            continue
        pushes.append(push)
        if len(pushes) >= k:
            break
    return pushes
