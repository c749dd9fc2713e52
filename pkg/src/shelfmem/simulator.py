"""Ground-truth shelf world: scenes, push dynamics, rendering and rasterization."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from . import geometry as geo
from .core import BACKGROUND, GridSpec, SemanticMap, Viewpoint
from .push_sampler import PushAction
from .raycast import FRONT_FACE, MISS, STARTED_INSIDE, march_rays

NO_RETURN = np.inf
CONTACT_TOL = 1e-6
# sample points are nudged off cell centers so that boundaries falling exactly
# on a center resolve half-open (lower side inside, upper side outside)
_NUDGE = np.array([1e-9, 1.3e-9])


class InfeasiblePushError(ValueError):
    """The pusher would start inside an object."""


@dataclass(frozen=True)
class SceneObject:
    """Rigid prism standing on the shelf floor.

    ``footprint`` holds CCW vertices in the object frame; the world polygon is
    the footprint rotated by ``yaw`` and translated to ``(x, y)``.
    """

    class_id: int
    footprint: tuple[tuple[float, float], ...]
    height: float
    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        fp = geo.as_poly(self.footprint)
        if geo.signed_area(fp) < 0:
            fp = fp[::-1]
        if not geo.is_convex_ccw(fp):
            raise ValueError("footprint must be a convex polygon with positive area")
        if self.class_id < 1:
            raise ValueError("class_id must be >= 1 (0 is background)")
        if not self.height > 0:
            raise ValueError("height must be positive")
        object.__setattr__(self, "footprint", tuple(tuple(float(v) for v in p) for p in fp))
        for name in ("height", "x", "y", "yaw"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def polygon(self) -> np.ndarray:
        return geo.place(self.footprint, self.x, self.y, self.yaw)

    @property
    def area(self) -> float:
        return geo.signed_area(self.footprint)

    def moved(self, dx: float, dy: float) -> "SceneObject":
        return replace(self, x=self.x + dx, y=self.y + dy)

    def to_dict(self) -> dict:
        return {"class_id": self.class_id, "footprint": [list(p) for p in self.footprint],
                "height": self.height, "pose": {"x": self.x, "y": self.y, "yaw": self.yaw}}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneObject":
        pose = d["pose"]
        return cls(int(d["class_id"]), tuple(map(tuple, d["footprint"])), float(d["height"]),
                   float(pose["x"]), float(pose["y"]), float(pose.get("yaw", 0.0)))


@dataclass(frozen=True)
class Scene:
    """Shelf interior (the grid box) plus the objects standing in it."""

    spec: GridSpec
    objects: tuple[SceneObject, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def walls(self) -> tuple[float, float, float, float]:
        lo, hi = self.spec.lower, self.spec.upper
        return (lo[0], lo[1], hi[0], hi[1])

    @property
    def interior_height(self) -> float:
        return self.spec.dims[2] * self.spec.cell_size

    def validate(self, tol: float = 1e-9) -> None:
        """Raise ValueError unless objects are in bounds and pairwise disjoint."""
        box = self.walls
        for k, o in enumerate(self.objects):
            if o.class_id >= self.spec.n_classes:
                raise ValueError(f"object {k}: class {o.class_id} out of range")
            if o.height > self.interior_height + tol:
                raise ValueError(f"object {k}: taller than the shelf interior")
            if not geo.inside_box(o.polygon, box, tol=1e-7):
                raise ValueError(f"object {k}: outside the walls")
        polys = [o.polygon for o in self.objects]
        for a in range(len(polys)):
            for b in range(a + 1, len(polys)):
                if geo.overlap_depth(polys[a], polys[b]) > 1e-7:
                    raise ValueError(f"objects {a} and {b} overlap")

    def floor_fraction(self) -> float:
        lo, hi = self.spec.lower, self.spec.upper
        return sum(o.area for o in self.objects) / float((hi[0] - lo[0]) * (hi[1] - lo[1]))


def _floor_samples(spec: GridSpec) -> np.ndarray:
    X, Y = spec.cell_centers_2d()
    return np.stack([X, Y], axis=-1) + _NUDGE


def instance_map(scene: Scene) -> np.ndarray:
    """Voxel grid of object indices (-1 = free); voxel centers decide membership."""
    spec = scene.spec
    H, W, D = spec.dims
    pts = _floor_samples(spec)
    zc = spec.origin[2] + (np.arange(D) + 0.5) * spec.cell_size
    inst = np.full((H, W, D), -1, dtype=np.int64)
    for k, o in enumerate(scene.objects):
        cols = geo.points_in_convex(pts, o.polygon, tol=0.0)
        layers = zc < o.height
        inst[cols[:, :, None] & layers[None, None, :]] = k
    return inst


def to_map(scene: Scene) -> SemanticMap:
    """Ground-truth map: voxel occupied iff its center lies inside an object."""
    inst = instance_map(scene)
    occ = inst >= 0
    spec = scene.spec
    pts = _floor_samples(spec)
    sem = np.full(spec.shape2d, BACKGROUND, dtype=np.int64)
    for o in scene.objects:
        sem[geo.points_in_convex(pts, o.polygon, tol=0.0)] = o.class_id
    return SemanticMap(occ, sem, spec.n_classes)


@dataclass(frozen=True, eq=False)
class Observation:
    """Depth (m, ``inf`` = no return) and class label per pixel."""

    viewpoint: Viewpoint
    depth: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        v = self.viewpoint
        depth = np.asarray(self.depth, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if depth.shape != (v.height, v.width) or labels.shape != depth.shape:
            raise ValueError("image dims do not match the viewpoint intrinsics")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "labels", labels)


@njit(cache=True)
def _first_hits(idx, t0, t1, counts, entry, exit_face, t_entry, occ_inst, max_range):
    R = counts.shape[0]
    depth = np.full(R, np.inf)
    inst = np.full(R, -2, np.int64)
    for r in range(R):
        e = entry[r]
        if e == MISS:
            continue
        if e != FRONT_FACE and e != STARTED_INSIDE:
            # ray meets the shelf shell from outside
            if t_entry[r] <= max_range:
                depth[r] = t_entry[r]
                inst[r] = -1
            continue
        n = counts[r]
        found = False
        for k in range(n):
            h = occ_inst[idx[r, k, 0], idx[r, k, 1], idx[r, k, 2]]
            if h >= 0:
                if t0[r, k] <= max_range:
                    depth[r] = t0[r, k]
                    inst[r] = h
                found = True
                break
        if not found and n > 0 and exit_face[r] >= 0 and exit_face[r] != FRONT_FACE:
            if t1[r, n - 1] <= max_range:
                depth[r] = t1[r, n - 1]
                inst[r] = -1
    return depth, inst


def _cast(spec: GridSpec, occ_inst: np.ndarray, origin, dirs, max_range):
    """First-hit depth and hit instance (-1 walls, -2 no return) per ray."""
    rb = march_rays(spec, origin, dirs, max_range)
    return _first_hits(rb.idx, rb.t0, rb.t1, rb.counts, rb.entry, rb.exit_face, rb.t_entry,
                       occ_inst, float(max_range))


def render_instances(scene: Scene, v: Viewpoint, stride: int = 1):
    """Depth image plus per-pixel object index (-1 wall, -2 no return)."""
    origin, dirs = v.pixel_rays(stride)
    shape = dirs.shape[:2]
    depth, inst = _cast(scene.spec, instance_map(scene), origin, dirs.reshape(-1, 3), v.max_range)
    return depth.reshape(shape), inst.reshape(shape)


def render(scene: Scene, v: Viewpoint) -> Observation:
    """Ray-cast the rasterized scene from ``v``; walls and floor read as background."""
    depth, inst = render_instances(scene, v)
    classes = np.array([o.class_id for o in scene.objects] + [BACKGROUND], dtype=np.int64)
    labels = np.where(inst >= 0, classes[np.where(inst >= 0, inst, -1)], BACKGROUND)
    return Observation(v, depth, labels)


def visible_objects(scene: Scene, views, stride: int = 1) -> np.ndarray:
    """Boolean per object: hit by at least one pixel of at least one view."""
    seen = np.zeros(len(scene.objects), dtype=bool)
    inst_map = instance_map(scene)
    for v in views:
        origin, dirs = v.pixel_rays(stride)
        _, inst = _cast(scene.spec, inst_map, origin, dirs.reshape(-1, 3), v.max_range)
        ids = inst[inst >= 0]
        seen[ids] = True
    return seen


def apply_push(scene: Scene, push: PushAction) -> Scene:
    """Quasi-static, translation-only push cascade.

    The pusher advances along the push direction; objects taller than the
    push height that it meets join the moving set, and moving objects
    recruit every object they run into. When any moving object reaches a
    wall the whole chain, pusher included, stops. Contact times are computed
    exactly from separating-axis intervals, so the motion is event driven
    rather than stepped.
    """
    d = push.dir
    box = scene.walls
    objs = list(scene.objects)
    polys = [o.polygon for o in objs]
    sx, sy = push.start[0], push.start[1]
    for o, poly in zip(objs, polys):
        if o.height > push.push_height and geo.points_in_convex(np.array([sx, sy]), poly, tol=-CONTACT_TOL):
            raise InfeasiblePushError("push starts inside an object footprint")
    if push.distance <= 0 or not objs:
        return scene

    pusher = push.pusher_polygon(0.0)
    disp = np.zeros(len(objs))
    moving: list[int] = []
    s = 0.0
    remaining = push.distance
    while remaining > 1e-12:
        # next contact: pusher against tall objects, movers against any object
        best_t, best_k = np.inf, -1
        cur_p = pusher + s * d
        for k, (o, poly) in enumerate(zip(objs, polys)):
            if k in moving:
                continue
            cand = []
            if o.height > push.push_height:
                iv = geo.contact_interval(cur_p, poly, d, CONTACT_TOL)
                if iv is not None and iv[1] > 0:
                    cand.append(max(iv[0], 0.0))
            for m in moving:
                iv = geo.contact_interval(polys[m] + disp[m] * d, poly, d, CONTACT_TOL)
                if iv is not None and iv[1] > 0:
                    cand.append(max(iv[0], 0.0))
            if cand and min(cand) < best_t:
                best_t, best_k = min(cand), k
        wall_t = min((geo.wall_clearance(polys[m] + disp[m] * d, box, d) for m in moving),
                     default=np.inf)
        step = min(best_t, wall_t, remaining)
        for m in moving:
            disp[m] += step
        s += step
        remaining -= step
        if step == wall_t and wall_t <= best_t:
            break
        if step == best_t and best_k >= 0:
            moving.append(best_k)
    new_objs = tuple(o.moved(disp[k] * d[0], disp[k] * d[1]) if disp[k] > 0 else o
                     for k, o in enumerate(objs))
    return Scene(scene.spec, new_objs)
