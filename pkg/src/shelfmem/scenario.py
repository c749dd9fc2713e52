"""Random cluttered-shelf scenes: occupancy targets, class affinities, regularity."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from . import geometry as geo
from .core import GridSpec
from .simulator import Scene, SceneObject, visible_objects

ALIGN_WEIGHT = 4.0
AFFINITY_MULT = 2.0


@dataclass(frozen=True)
class ClassSpec:
    """Catalog entry: footprint template (object frame, CCW), height and affinities."""

    class_id: int
    name: str
    footprint: tuple[tuple[float, float], ...]
    height: float
    affinity: tuple[int, ...] = ()
    radius: float = 0.0
    base_prob: float | None = None

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius_of_influence must be >= 0")
        object.__setattr__(self, "footprint", tuple(map(tuple, geo.as_poly(self.footprint))))
        object.__setattr__(self, "affinity", tuple(int(a) for a in self.affinity))

    @property
    def area(self) -> float:
        return geo.signed_area(self.footprint)

    @classmethod
    def from_dict(cls, d: dict) -> "ClassSpec":
        if "footprint" in d:
            fp = d["footprint"]
        elif d["shape"] == "box":
            fp = geo.rectangle(*d["size"])
        elif d["shape"] == "cylinder":
            fp = geo.regular_polygon(d["size"][0], 8)
        else:
            raise ValueError(f"unknown shape {d['shape']!r}")
        return cls(int(d["class_id"]), d.get("name", str(d["class_id"])), tuple(map(tuple, fp)),
                   float(d["height"]), tuple(d.get("affinity", ())), float(d.get("radius", 0.0)),
                   d.get("base_prob"))

    def to_dict(self) -> dict:
        out = {"class_id": self.class_id, "name": self.name,
               "footprint": [list(p) for p in self.footprint], "height": self.height,
               "affinity": list(self.affinity), "radius": self.radius}
        if self.base_prob is not None:
            out["base_prob"] = self.base_prob
        return out


def load_catalog(path=None) -> tuple[ClassSpec, ...]:
    """Read a catalog file (JSON); the bundled 14-class grocery catalog by default."""
    if path is None:
        text = resources.files("shelfmem").joinpath("data/catalog.json").read_text()
    else:
        with open(path) as f:
            text = f.read()
    return tuple(ClassSpec.from_dict(c) for c in json.loads(text)["classes"])


@lru_cache(maxsize=1)
def default_catalog() -> tuple[ClassSpec, ...]:
    return load_catalog()


@dataclass(frozen=True)
class GenParams:
    """Scene generator settings.

    Attributes:
        occupancy_range: target range for the covered fraction of the floor.
        rho: regularity in [0, 1]; raises the odds of placing objects in line
            (same lateral position) with earlier ones.
        class_catalog: classes that may be placed.
        max_iterations: placement attempts before giving up on the target.
        size_jitter: per-axis footprint scale range.
        align_weight: sampling weight boost w for aligned cells (x (1 + rho w)).
        affinity_mult: class probability multiplier inside a radius of influence.
    """

    occupancy_range: tuple[float, float] = (0.30, 0.45)
    rho: float = 0.0
    class_catalog: tuple[ClassSpec, ...] = field(default_factory=default_catalog)
    max_iterations: int = 400
    size_jitter: tuple[float, float] = (1.0, 1.0)
    align_weight: float = ALIGN_WEIGHT
    affinity_mult: float = AFFINITY_MULT
    spec: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        lo, hi = self.occupancy_range
        if not 0 <= lo <= hi <= 1:
            raise ValueError("need 0 <= lo <= hi <= 1")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        if not self.class_catalog:
            raise ValueError("class catalog is empty")
        if not 0 < self.size_jitter[0] <= self.size_jitter[1]:
            raise ValueError("size_jitter must be a positive (lo, hi) range")
        object.__setattr__(self, "class_catalog", tuple(self.class_catalog))

    def base_probs(self) -> np.ndarray:
        areas = np.array([c.area for c in self.class_catalog])
        p = np.array([c.base_prob if c.base_prob is not None else 1.0 + a / areas.max()
                      for c, a in zip(self.class_catalog, areas)])
        return p / p.sum()

    def to_dict(self) -> dict:
        return {"occupancy_range": list(self.occupancy_range), "rho": self.rho,
                "class_catalog": [c.to_dict() for c in self.class_catalog],
                "max_iterations": self.max_iterations, "size_jitter": list(self.size_jitter),
                "align_weight": self.align_weight, "affinity_mult": self.affinity_mult,
                "spec": self.spec.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "GenParams":
        kw = {}
        if "occupancy_range" in d:
            kw["occupancy_range"] = tuple(d["occupancy_range"])
        if "size_jitter" in d:
            kw["size_jitter"] = tuple(d["size_jitter"])
        if "class_catalog" in d:
            kw["class_catalog"] = tuple(ClassSpec.from_dict(c) for c in d["class_catalog"])
        if "spec" in d:
            kw["spec"] = GridSpec.from_dict(d["spec"])
        for k in ("rho", "max_iterations", "align_weight", "affinity_mult"):
            if k in d:
                kw[k] = d[k]
        return cls(**kw)


def obstacle_cells(scene: Scene) -> np.ndarray:
    """Floor cells whose open square meets an object footprint."""
    spec = scene.spec
    mask = np.zeros(spec.shape2d, dtype=bool)
    for o in scene.objects:
        mask |= geo.raster_touching(o.polygon, spec.origin[0], spec.origin[1], spec.cell_size,
                                    spec.shape2d)
    return mask


def footprint_offsets(footprint, yaw: float, cell: float) -> np.ndarray:
    """Cell offsets touched by a footprint centered on a cell center, shape (K, 2)."""
    poly = geo.rotate(footprint, yaw)
    K = int(np.ceil(np.abs(poly).max() / cell)) + 1
    local = geo.raster_touching(poly, -(K + 0.5) * cell, -(K + 0.5) * cell, cell,
                                (2 * K + 1, 2 * K + 1))
    off = np.argwhere(local) - K
    return off if len(off) else np.zeros((1, 2), dtype=np.int64)


def placeable_mask(scene: Scene, footprint, yaw: float, obstacles=None) -> np.ndarray:
    """Cells whose center can hold the footprint's origin without any overlap.

    Discrete Minkowski sum: obstacles (and everything outside the walls) are
    dilated by the cells the footprint touches. Since both sides are
    rasterized conservatively the mask never admits a real overlap, and it
    loses at most about a cell of free space per side.
    """
    spec = scene.spec
    H, W = spec.shape2d
    off = footprint_offsets(footprint, yaw, spec.cell_size)
    P = int(np.abs(off).max()) + 1
    blocked = np.ones((H + 2 * P, W + 2 * P), dtype=bool)
    blocked[P:P + H, P:P + W] = obstacle_cells(scene) if obstacles is None else obstacles
    out = np.ones((H, W), dtype=bool)
    for di, dj in off:
        out &= ~blocked[P + di:P + di + H, P + dj:P + dj + W]
    return out


def _fits_at(obstacles: np.ndarray, off: np.ndarray, i: int, j: int) -> bool:
    cells = off + np.array([i, j])
    H, W = obstacles.shape
    if (cells < 0).any() or (cells[:, 0] >= H).any() or (cells[:, 1] >= W).any():
        return False
    return not obstacles[cells[:, 0], cells[:, 1]].any()


def placeable_area(scene: Scene, class_id: int, yaw: float, catalog=None) -> np.ndarray:
    """Placeable centroid cells for a catalog class at the given yaw."""
    catalog = catalog or default_catalog()
    for c in catalog:
        if c.class_id == class_id:
            return placeable_mask(scene, c.footprint, yaw)
    raise KeyError(f"class {class_id} not in catalog")


def sample_scene(params: GenParams, rng_seed) -> Scene:
    """Grow a scene object by object until the drawn floor-occupancy target is met.

    Each iteration draws a floor cell no object touches (cells laterally in line with an
    earlier centroid weighted by 1 + rho * w), a yaw in [0, pi) and a size
    jitter, then picks a class among those placeable there and not pushing
    the occupancy past the upper bound. Class odds are the base probability
    doubled (``affinity_mult``) for every class in the affinity set of an
    earlier object whose radius of influence contains the point.
    """
    rng = np.random.default_rng(rng_seed)
    spec = params.spec
    cat = params.class_catalog
    lo, hi = params.occupancy_range
    target = rng.uniform(lo, hi)
    floor_area = float(np.prod(spec.upper[:2] - spec.lower[:2]))
    base = params.base_probs()
    ids = np.array([c.class_id for c in cat])
    X, Y = spec.cell_centers_2d()
    scene = Scene(spec, ())
    if not any(placeable_mask(scene, c.footprint, 0.0).any() for c in cat):
        raise ValueError("no catalog class fits on the empty shelf")
    covered_area = 0.0
    centroid_cols: list[int] = []
    obst = np.zeros(spec.shape2d, dtype=bool)
    for _ in range(params.max_iterations):
        if covered_area / floor_area >= target:
            break
        # a cell touched by any object cannot hold a centroid
        free = ~obst
        weight = np.ones(spec.shape2d)
        if centroid_cols:
            aligned = np.zeros(spec.shape2d[0], dtype=bool)
            for i in centroid_cols:
                aligned[max(i - 1, 0):i + 2] = True
            weight[aligned] *= 1.0 + params.rho * params.align_weight
        weight = np.where(free, weight, 0.0).ravel()
        if weight.sum() <= 0:
            break
        cell = rng.choice(weight.size, p=weight / weight.sum())
        ci, cj = np.unravel_index(cell, spec.shape2d)
        x, y = float(X[ci, cj]), float(Y[ci, cj])
        yaw = float(rng.uniform(0.0, np.pi))
        scale = rng.uniform(params.size_jitter[0], params.size_jitter[1], size=2)

        probs = base.copy()
        for o in scene.objects:
            c = cat[int(np.flatnonzero(ids == o.class_id)[0])]
            if np.hypot(o.x - x, o.y - y) <= c.radius:
                probs[np.isin(ids, c.affinity)] *= params.affinity_mult
        fps = [np.asarray(c.footprint) * scale for c in cat]
        for k, fp in enumerate(fps):
            if (covered_area + geo.signed_area(fp)) / floor_area > hi + 1e-12:
                probs[k] = 0.0
        # drawing from the odds restricted to placeable classes, by rejection
        k = -1
        while probs.sum() > 0:
            k = int(rng.choice(len(cat), p=probs / probs.sum()))
            if _fits_at(obst, footprint_offsets(fps[k], yaw, spec.cell_size), ci, cj):
                break
            probs[k] = 0.0
            k = -1
        if k < 0:
            continue
        obj = SceneObject(int(ids[k]), tuple(map(tuple, fps[k])), cat[k].height, x, y, yaw)
        scene = Scene(spec, scene.objects + (obj,))
        covered_area += obj.area
        obst |= geo.raster_touching(obj.polygon, spec.origin[0], spec.origin[1], spec.cell_size,
                                    spec.shape2d)
        centroid_cols.append(int(ci))
    scene.validate()
    return scene


def alignment_fraction(scene: Scene) -> float:
    """Fraction of object pairs whose centroids are within one cell laterally."""
    xs = np.array([o.x for o in scene.objects])
    if len(xs) < 2:
        return 0.0
    d = np.abs(xs[:, None] - xs[None, :])
    iu = np.triu_indices(len(xs), k=1)
    return float(np.mean(d[iu] <= scene.spec.cell_size + 1e-9))


def occlusion_level(scene: Scene, views, stride: int = 1) -> str:
    """'high' if some object is hidden from every view, else 'low'."""
    return "low" if visible_objects(scene, views, stride).all() else "high"


def sample_scenes(params: GenParams, seed: int, count: int, occlusion: str | None = None,
                  views=None, max_tries: int = 100, stride: int = 1) -> list[Scene]:
    """``count`` scenes from consecutive sub-seeds, optionally filtered by occlusion level.

    High-occlusion scenes keep at least one object that no pixel of any view
    reaches; low-occlusion scenes have every object visible somewhere.
    """
    if occlusion not in (None, "low", "high"):
        raise ValueError("occlusion must be 'low' or 'high'")
    if occlusion is not None and views is None:
        from .core import default_viewpoints
        views = default_viewpoints(params.spec)
    ss = np.random.SeedSequence(seed)
    out = []
    for child in ss.spawn(count):
        for sub in child.spawn(max_tries):
            sc = sample_scene(params, sub)
            if occlusion is None or occlusion_level(sc, views, stride) == occlusion:
                out.append(sc)
                break
        else:
            raise RuntimeError(f"no {occlusion}-occlusion scene within {max_tries} tries")
    return out
