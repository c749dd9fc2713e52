"""Planar convex-polygon helpers: overlap, time of impact, rasterization."""
from __future__ import annotations

import numpy as np
from numba import njit

TOL = 1e-9


def as_poly(vertices) -> np.ndarray:
    p = np.asarray(vertices, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
        raise ValueError("polygon needs at least three 2D vertices")
    return p


def signed_area(poly) -> float:
    p = as_poly(poly)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def is_convex_ccw(poly, tol=TOL) -> bool:
    p = as_poly(poly)
    e = np.roll(p, -1, axis=0) - p
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    return bool(np.all(cross >= -tol) and signed_area(p) > tol)


def rectangle(width: float, depth: float) -> np.ndarray:
    """Axis-aligned rectangle centered at the origin, CCW."""
    w, d = width / 2, depth / 2
    return np.array([[-w, -d], [w, -d], [w, d], [-w, d]])


def regular_polygon(radius: float, n: int = 8) -> np.ndarray:
    a = (np.arange(n) + 0.5) * 2 * np.pi / n
    return np.stack([radius * np.cos(a), radius * np.sin(a)], axis=1)


def rotate(poly, yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return as_poly(poly) @ np.array([[c, s], [-s, c]])


def place(footprint, x: float, y: float, yaw: float) -> np.ndarray:
    return rotate(footprint, yaw) + np.array([x, y])


def _axes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    edges = np.concatenate([np.roll(a, -1, axis=0) - a, np.roll(b, -1, axis=0) - b])
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    norms = np.linalg.norm(normals, axis=1)
    keep = norms > 1e-15
    return normals[keep] / norms[keep, None]


def overlap_depth(a, b) -> float:
    """Minimum penetration over separating axes; > 0 means interiors overlap."""
    a, b = as_poly(a), as_poly(b)
    ax = _axes(a, b)
    pa, pb = a @ ax.T, b @ ax.T
    pen = np.minimum(pa.max(0) - pb.min(0), pb.max(0) - pa.min(0))
    return float(pen.min())


def polygons_overlap(a, b, tol=1e-6) -> bool:
    return overlap_depth(a, b) > tol


def contact_interval(a, b, direction, tol=1e-6) -> tuple[float, float] | None:
    """Parameter interval where ``a + t * direction`` has interior overlap with ``b``.

    Overlap must exceed ``tol`` of penetration somewhere in the interval, so
    polygons that slide along each other while touching never register a
    contact. The returned bounds are the exact touching times. Returns None
    when the translated polygon never overlaps ``b``.
    """
    a, b = as_poly(a), as_poly(b)
    d = np.asarray(direction, dtype=float)
    ax = _axes(a, b)
    pa, pb = a @ ax.T, b @ ax.T
    a_lo, a_hi = pa.min(0), pa.max(0)
    b_lo, b_hi = pb.min(0), pb.max(0)
    v = ax @ d
    t_lo, t_hi = -np.inf, np.inf
    s_lo, s_hi = -np.inf, np.inf
    for k in range(len(ax)):
        # need a_hi + t v > b_lo + tol and a_lo + t v < b_hi - tol
        if abs(v[k]) < 1e-15:
            if not (a_hi[k] > b_lo[k] + tol and a_lo[k] < b_hi[k] - tol):
                return None
            continue
        r1, r2 = (b_lo[k] + tol - a_hi[k]) / v[k], (b_hi[k] - tol - a_lo[k]) / v[k]
        e1, e2 = (b_lo[k] - a_hi[k]) / v[k], (b_hi[k] - a_lo[k]) / v[k]
        lo, hi = (r1, r2) if v[k] > 0 else (r2, r1)
        t_lo, t_hi = max(t_lo, lo), min(t_hi, hi)
        if t_lo >= t_hi:
            return None
        lo, hi = (e1, e2) if v[k] > 0 else (e2, e1)
        s_lo, s_hi = max(s_lo, lo), min(s_hi, hi)
    return s_lo, s_hi


def wall_clearance(poly, box, direction) -> float:
    """Largest t >= 0 keeping ``poly + t * direction`` inside the box.

    ``box`` is (xmin, ymin, xmax, ymax). Returns 0 for polygons already
    touching the wall they move toward.
    """
    p = as_poly(poly)
    d = np.asarray(direction, dtype=float)
    t = np.inf
    for a, (lo, hi) in enumerate(((box[0], box[2]), (box[1], box[3]))):
        if d[a] > 1e-15:
            t = min(t, float(np.min((hi - p[:, a]) / d[a])))
        elif d[a] < -1e-15:
            t = min(t, float(np.min((lo - p[:, a]) / d[a])))
    return max(t, 0.0)


def inside_box(poly, box, tol=1e-9) -> bool:
    p = as_poly(poly)
    return bool(np.all(p[:, 0] >= box[0] - tol) and np.all(p[:, 0] <= box[2] + tol)
                and np.all(p[:, 1] >= box[1] - tol) and np.all(p[:, 1] <= box[3] + tol))


def points_in_convex(points, poly, tol=1e-12) -> np.ndarray:
    """Boolean mask of points inside (or on) a CCW convex polygon."""
    p = as_poly(poly)
    pts = np.asarray(points, dtype=float)
    inside = np.ones(pts.shape[:-1], dtype=bool)
    for i in range(len(p)):
        a, b = p[i], p[(i + 1) % len(p)]
        cross = (b[0] - a[0]) * (pts[..., 1] - a[1]) - (b[1] - a[1]) * (pts[..., 0] - a[0])
        inside &= cross >= -tol
    return inside


def raster_centers(poly, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Cells of a regular grid (given cell-center coordinates) whose centers lie in ``poly``."""
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return points_in_convex(np.stack([X, Y], axis=-1), poly)


@njit(cache=True)
def _touching_kernel(p, x0, y0, cell, H, W):
    out = np.zeros((H, W), np.bool_)
    n = p.shape[0]
    xmin, xmax = p[:, 0].min(), p[:, 0].max()
    ymin, ymax = p[:, 1].min(), p[:, 1].max()
    i0 = max(int(np.floor((xmin - x0) / cell)), 0)
    i1 = min(int(np.floor((xmax - x0) / cell)), H - 1)
    j0 = max(int(np.floor((ymin - y0) / cell)), 0)
    j1 = min(int(np.floor((ymax - y0) / cell)), W - 1)
    normals = np.zeros((n, 2))
    lo = np.zeros(n)
    hi = np.zeros(n)
    m = 0
    for k in range(n):
        ex = p[(k + 1) % n, 0] - p[k, 0]
        ey = p[(k + 1) % n, 1] - p[k, 1]
        ln = np.hypot(ex, ey)
        if ln <= 1e-15:
            continue
        nx, ny = -ey / ln, ex / ln
        normals[m, 0], normals[m, 1] = nx, ny
        lo[m], hi[m] = np.inf, -np.inf
        for q in range(n):
            v = p[q, 0] * nx + p[q, 1] * ny
            lo[m] = min(lo[m], v)
            hi[m] = max(hi[m], v)
        m += 1
    for i in range(i0, i1 + 1):
        sx = x0 + i * cell
        for j in range(j0, j1 + 1):
            sy = y0 + j * cell
            pen = min(xmax - sx, sx + cell - xmin, ymax - sy, sy + cell - ymin)
            for k in range(m):
                nx, ny = normals[k, 0], normals[k, 1]
                c = sx * nx + sy * ny
                a = min(0.0, cell * nx) + min(0.0, cell * ny)
                b = max(0.0, cell * nx) + max(0.0, cell * ny)
                pen = min(pen, hi[k] - (c + a), (c + b) - lo[k])
            out[i, j] = pen > 1e-12
    return out


def raster_touching(poly, x0: float, y0: float, cell: float, shape) -> np.ndarray:
    """Cells whose open square has interior overlap with ``poly`` (conservative)."""
    p = np.ascontiguousarray(as_poly(poly))
    return _touching_kernel(p, float(x0), float(y0), float(cell), int(shape[0]), int(shape[1]))


def convex_hull(points) -> np.ndarray:
    """CCW convex hull (Andrew's monotone chain), collinear points dropped."""
    pts = sorted(set(map(tuple, np.round(np.asarray(points, dtype=float), 12))))
    if len(pts) <= 2:
        return np.asarray(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1])
