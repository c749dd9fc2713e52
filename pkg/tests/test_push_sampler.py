import numpy as np
import pytest

from conftest import box, certain
from shelfmem.core import GridSpec, new_uniform_belief
from shelfmem.push_sampler import (MAX_DISTANCE, MIN_DISTANCE, PushAction, frontier_mask,
                                   frontier_points, sample_pushes)
from shelfmem.simulator import InfeasiblePushError, Scene, apply_push, to_map


def _brute_frontier(b):
    """Direct scan of the gate predicate over every voxel."""
    p, s = b.occ_mean, b.occ_strength
    H, W, D = b.spec.dims
    out = np.zeros((H, W, D), bool)
    for i in range(H):
        for j in range(W):
            for k in range(D):
                path = all(p[i, jj, k] < 0.2 and s[i, jj, k] >= 4 for jj in range(j + 1))
                ahead = any(p[i, jj, k] > 0.6 for jj in range(j + 1, min(j + 4, W)))
                out[i, j, k] = path and ahead
    return out


def _box_belief():
    spec = GridSpec()
    sc = Scene(spec, (box(1, 0.4, 0.09, h=0.2),))
    return sc, certain(spec, to_map(sc))


def test_frontier_uniform_and_empty_shelf():
    spec = GridSpec()
    assert len(frontier_points(new_uniform_belief(spec))) == 0
    assert len(frontier_points(certain(spec, to_map(Scene(spec))))) == 0


def test_frontier_one_box():
    sc, b = _box_belief()
    mask = frontier_mask(b)
    assert np.array_equal(mask, _brute_frontier(b))
    pts = frontier_points(b)
    xs = np.unique(np.round(pts[:, 0], 6))
    cols = np.argwhere(to_map(sc).occ.any(axis=(1, 2)))[:, 0]
    assert np.allclose(xs, (cols + 0.5) * sc.spec.cell_size)
    assert np.all(np.diff(pts[:, 0]) >= 0)
    # only the two free cells in front of the box face, below its top
    assert set(np.round(pts[:, 1], 6)) == {0.01, 0.03}
    assert pts[:, 2].max() < 0.2


def test_frontier_matches_brute_on_scene_belief(scenes_low):
    from shelfmem.core import default_viewpoints
    from shelfmem.observation import update_observation
    from shelfmem.simulator import render
    sc = scenes_low[4]
    b = new_uniform_belief(sc.spec)
    for v in default_viewpoints()[::10]:
        b = update_observation(b, render(sc, v))
    assert np.array_equal(frontier_mask(b), _brute_frontier(b))


def test_sample_pushes_empty_frontier():
    assert sample_pushes(new_uniform_belief(GridSpec()), 20, 0) == []
    with pytest.raises(ValueError):
        sample_pushes(new_uniform_belief(GridSpec()), 0, 0)


def test_sample_pushes_point_into_box():
    sc, b = _box_belief()
    pushes = sample_pushes(b, 20, 0)
    assert 0 < len(pushes) <= 20
    o = sc.objects[0]
    c = sc.spec.cell_size
    lo = np.min(o.polygon, axis=0) - c
    hi = np.max(o.polygon, axis=0) + c
    for p in pushes:
        t = np.linspace(0, 0.1 + c, 200)
        path = np.asarray(p.start[:2]) + t[:, None] * p.dir
        inside = np.all((path >= lo) & (path <= hi), axis=1)
        assert inside.any()


def test_sample_pushes_invariants_and_determinism(scenes_high):
    from shelfmem.core import default_viewpoints
    from shelfmem.observation import update_observation
    from shelfmem.simulator import render
    sc = scenes_high[3]
    b = new_uniform_belief(sc.spec)
    for v in default_viewpoints()[::8]:
        b = update_observation(b, render(sc, v))
    a = sample_pushes(b, 20, 4)
    assert a == sample_pushes(b, 20, 4)
    assert len(a) > 0
    starts = [p.start for p in a]
    assert len(set(starts)) == len(starts)
    for p in a:
        assert MIN_DISTANCE <= p.distance <= MAX_DISTANCE and p.is_sampled_valid()
        assert np.linalg.norm(p.dir) == pytest.approx(1.0)
        assert p.swept_cells(sc.spec).any()
        assert 0 <= p.start[1] <= sc.spec.upper[1]


def test_sampled_pushes_never_start_inside_objects(scenes_all):
    n = 0
    for seed, sc in enumerate(scenes_all):
        b = certain(sc.spec, to_map(sc))
        for p in sample_pushes(b, 20, seed):
            try:
                apply_push(sc, p)
            except InfeasiblePushError:
                pytest.fail(f"sampled push starts inside an object: {p}")
            n += 1
    assert n > 100


def test_push_action_validation_and_round_trip():
    p = PushAction((0.1, 0.0, 0.02), (3.0, 4.0), 0.1)
    assert p.direction == pytest.approx((0.6, 0.8))
    assert PushAction.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        PushAction((0, 0, 0), (0.0, 0.0), 0.1)
    with pytest.raises(ValueError):
        PushAction((0, 0, 0), (1.0, 0.0), -0.1)
    assert not PushAction((0, 0, 0), (1.0, 0.0), 0.2).is_sampled_valid()
