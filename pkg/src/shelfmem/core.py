"""Grid geometry, evidential belief containers and entropy helpers.

Axis convention used throughout the package: axis 0 is the lateral shelf
coordinate (x), axis 1 is depth into the shelf measured from the opening
(y), axis 2 is height above the shelf floor (z).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BACKGROUND = 0
DEFAULT_N_CLASSES = 15


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GridSpec:
    """Dense voxel grid over the shelf interior.

    Attributes:
        origin: world coordinates (m) of the grid's lower corner.
        cell_size: edge length of a voxel (m).
        dims: (H, W, D) cell counts along x, y, z.
        n_classes: number of semantic classes, background included.
    """

    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    cell_size: float = 0.02
    dims: tuple[int, int, int] = (40, 20, 20)
    n_classes: int = DEFAULT_N_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        if len(self.origin) != 3 or len(self.dims) != 3:
            raise ValueError("origin and dims must have three components")
        if not np.isfinite(self.cell_size) or self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if min(self.dims) < 1:
            raise ValueError(f"all dims must be >= 1, got {self.dims}")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2 (background plus one class)")

    @classmethod
    def from_extent(cls, size=(0.8, 0.4, 0.4), cell_size=0.02, origin=(0.0, 0.0, 0.0),
                    n_classes=DEFAULT_N_CLASSES) -> "GridSpec":
        if cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {cell_size}")
        dims = tuple(int(round(s / cell_size)) for s in size)
        return cls(origin=origin, cell_size=cell_size, dims=dims, n_classes=n_classes)

    @property
    def shape2d(self) -> tuple[int, int]:
        return self.dims[0], self.dims[1]

    @property
    def n_voxels(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + np.asarray(self.dims, dtype=float) * self.cell_size

    def world_to_index(self, points) -> np.ndarray:
        """Floor-convention voxel index of world points (no bounds check)."""
        p = np.asarray(points, dtype=float)
        return np.floor((p - self.lower) / self.cell_size).astype(np.int64)

    def index_to_world_center(self, idx) -> np.ndarray:
        i = np.asarray(idx, dtype=float)
        return self.lower + (i + 0.5) * self.cell_size

    def in_bounds(self, idx) -> np.ndarray:
        i = np.asarray(idx)
        return np.all((i >= 0) & (i < np.asarray(self.dims)), axis=-1)

    def cell_centers_2d(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (x, y) of floor cell centers, each of shape (H, W)."""
        xs = self.origin[0] + (np.arange(self.dims[0]) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(self.dims[1]) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys, indexing="ij")

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "cell_size": self.cell_size,
                "dims": list(self.dims), "n_classes": self.n_classes}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(origin=tuple(d["origin"]), cell_size=float(d["cell_size"]),
                   dims=tuple(d["dims"]), n_classes=int(d["n_classes"]))


@dataclass(frozen=True, eq=False)
class EvidentialBelief:
    """Beta parameters per voxel and Dirichlet parameters per floor cell.

    ``lambda_occ`` has shape (H, W, D, 2) holding (alpha, beta); alpha counts
    evidence for "occupied". ``lambda_sem`` has shape (H, W, n_classes).
    Arrays are stored read-only; updates build a new belief.
    """

    spec: GridSpec
    lambda_occ: np.ndarray
    lambda_sem: np.ndarray

    def __post_init__(self):
        occ = np.maximum(np.asarray(self.lambda_occ, dtype=float), 1.0)
        sem = np.maximum(np.asarray(self.lambda_sem, dtype=float), 1.0)
        H, W, D = self.spec.dims
        if occ.shape != (H, W, D, 2):
            raise ValueError(f"lambda_occ shape {occ.shape} does not match {(H, W, D, 2)}")
        if sem.shape != (H, W, self.spec.n_classes):
            raise ValueError(f"lambda_sem shape {sem.shape} does not match "
                             f"{(H, W, self.spec.n_classes)}")
        if not (np.all(np.isfinite(occ)) and np.all(np.isfinite(sem))):
            raise ValueError("evidential parameters must be finite")
        object.__setattr__(self, "lambda_occ", _frozen(occ))
        object.__setattr__(self, "lambda_sem", _frozen(sem))

    @property
    def alpha(self) -> np.ndarray:
        return self.lambda_occ[..., 0]

    @property
    def beta(self) -> np.ndarray:
        return self.lambda_occ[..., 1]

    @property
    def occ_strength(self) -> np.ndarray:
        return self.lambda_occ.sum(axis=-1)

    @property
    def occ_mean(self) -> np.ndarray:
        return self.lambda_occ[..., 0] / self.lambda_occ.sum(axis=-1)

    @property
    def sem_strength(self) -> np.ndarray:
        return self.lambda_sem.sum(axis=-1)

    @property
    def sem_mean(self) -> np.ndarray:
        return self.lambda_sem / self.lambda_sem.sum(axis=-1, keepdims=True)

    def replace(self, lambda_occ=None, lambda_sem=None) -> "EvidentialBelief":
        return EvidentialBelief(
            self.spec,
            self.lambda_occ if lambda_occ is None else lambda_occ,
            self.lambda_sem if lambda_sem is None else lambda_sem,
        )


@dataclass(frozen=True, eq=False)
class SemanticMap:
    """Deterministic metric-semantic map: 3D occupancy and a 2D class layer."""

    occ: np.ndarray
    sem: np.ndarray
    n_classes: int = DEFAULT_N_CLASSES

    def __post_init__(self):
        occ = np.asarray(self.occ, dtype=bool)
        sem = np.asarray(self.sem, dtype=np.int64)
        if occ.ndim != 3 or sem.shape != occ.shape[:2]:
            raise ValueError("occ must be (H, W, D) and sem (H, W)")
        if sem.size and (sem.min() < 0 or sem.max() >= self.n_classes):
            raise ValueError("class index out of range")
        object.__setattr__(self, "occ", occ)
        object.__setattr__(self, "sem", sem)

    @property
    def column_occupied(self) -> np.ndarray:
        return self.occ.any(axis=2)


@dataclass(frozen=True)
class Viewpoint:
    """Pinhole camera pose and intrinsics.

    ``rotation`` is the camera-to-world rotation, rows of the 3x3 matrix
    stored as tuples; camera axes follow the x-right, y-down, z-forward
    convention.
    """

    position: tuple[float, float, float]
    rotation: tuple[tuple[float, ...], ...]
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    max_range: float = 1.5

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-6) or np.linalg.det(R) < 0:
            raise ValueError("rotation must be a proper rigid rotation")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dims must be >= 1")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "rotation", tuple(tuple(float(v) for v in row) for row in R))

    @classmethod
    def look_at(cls, position, target, fov_deg=70.0, width=64, height=48,
                max_range=1.5, up=(0.0, 0.0, 1.0)) -> "Viewpoint":
        p = np.asarray(position, dtype=float)
        fwd = np.asarray(target, dtype=float) - p
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=float))
        if np.linalg.norm(right) < 1e-9:
            right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        R = np.stack([right, down, fwd], axis=1)
        f = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
        return cls(tuple(p), tuple(map(tuple, R)), f, f, width / 2.0, height / 2.0,
                   int(width), int(height), float(max_range))

    @property
    def R(self) -> np.ndarray:
        return np.asarray(self.rotation)

    def pixel_grid(self, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Row/column indices of the pixels sampled at ``stride``."""
        if stride < 1:
            raise ValueError("stride must be >= 1")
        rows = np.arange(stride // 2, self.height, stride)
        cols = np.arange(stride // 2, self.width, stride)
        return np.meshgrid(rows, cols, indexing="ij")

    def pixel_rays(self, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """World-frame unit ray directions for sampled pixels, shape (h, w, 3).

        Returns (origin, directions); origin is the camera center.
        """
        rr, cc = self.pixel_grid(stride)
        x = (cc + 0.5 - self.cx) / self.fx
        y = (rr + 0.5 - self.cy) / self.fy
        d_cam = np.stack([x, y, np.ones_like(x)], axis=-1)
        d = d_cam @ self.R.T
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return np.asarray(self.position), d

    def to_dict(self) -> dict:
        return {"position": list(self.position), "rotation": [list(r) for r in self.rotation],
                "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height, "max_range": self.max_range}

    @classmethod
    def from_dict(cls, d: dict) -> "Viewpoint":
        return cls(tuple(d["position"]), tuple(map(tuple, d["rotation"])), d["fx"], d["fy"],
                   d["cx"], d["cy"], int(d["width"]), int(d["height"]), d["max_range"])


def default_viewpoints(spec: GridSpec | None = None, n_lateral=10, n_vertical=6,
                       standoff=0.35, width=64, height=48, fov_deg=70.0,
                       max_range=1.5) -> list[Viewpoint]:
    """Planar array of cameras in front of the shelf opening.

    All cameras look at the shelf interior center. The default 10 x 6 array
    gives 60 poses.
    """
    spec = spec or GridSpec()
    lo, hi = spec.lower, spec.upper
    center = (lo + hi) / 2
    span_x = hi[0] - lo[0]
    xs = np.linspace(lo[0] - 0.125 * span_x, hi[0] + 0.125 * span_x, n_lateral)
    zs = np.linspace(lo[2] + 0.05, hi[2] + 0.2, n_vertical)
    y = lo[1] - standoff
    views = []
    for z in zs:
        for x in xs:
            views.append(Viewpoint.look_at((x, y, z), center, fov_deg, width, height, max_range))
    return views


def new_uniform_belief(spec: GridSpec) -> EvidentialBelief:
    """Uninformed evidential belief: every Beta and Dirichlet parameter is 1."""
    if not isinstance(spec, GridSpec):
        raise TypeError("spec must be a GridSpec")
    H, W, D = spec.dims
    return EvidentialBelief(spec, np.ones((H, W, D, 2)), np.ones((H, W, spec.n_classes)))


def belief_from_map(spec: GridSpec, m: SemanticMap, strength: float = 1e6) -> EvidentialBelief:
    """Near-certain belief concentrated on ``m`` (used for oracles and tests)."""
    occ = np.ones(m.occ.shape + (2,))
    occ[..., 0] = np.where(m.occ, strength, 1.0)
    occ[..., 1] = np.where(m.occ, 1.0, strength)
    sem = np.ones(m.sem.shape + (spec.n_classes,))
    np.put_along_axis(sem, m.sem[..., None], strength, axis=-1)
    return EvidentialBelief(spec, occ, sem)


def bernoulli_entropy(p):
    """Binary entropy in nats, with 0 ln 0 taken as 0."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log(p), 0.0) - np.where(q > 0, q * np.log(q), 0.0)
    return h if h.ndim else float(h)


def categorical_entropy(probs, axis=-1):
    probs = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=axis)


def semantic_entropy(belief: EvidentialBelief) -> float:
    """Sum over floor cells of the entropy of the Dirichlet-mean categorical."""
    return float(categorical_entropy(belief.sem_mean).sum())


def occupancy_entropy(belief: EvidentialBelief) -> float:
    return float(bernoulli_entropy(belief.occ_mean).sum())


def most_likely_map(belief: EvidentialBelief) -> SemanticMap:
    """Maximum-probability map; occupancy ties at 0.5 resolve to free."""
    occ = belief.lambda_occ[..., 0] > belief.lambda_occ[..., 1]
    # argmax on parameters equals argmax on means and returns the lowest index on ties
    sem = np.argmax(belief.lambda_sem, axis=-1)
    sem = np.where(occ.any(axis=2), sem, BACKGROUND)
    return SemanticMap(occ, sem, belief.spec.n_classes)
