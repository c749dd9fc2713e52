import numpy as np
import pytest

from conftest import box
from oracles import entry_face_ok, slab
from shelfmem.core import GridSpec, Viewpoint, default_viewpoints, new_uniform_belief
from shelfmem.observation import K_FREE, K_OCC, K_SEM, update_observation
from shelfmem.raycast import traverse_ray
from shelfmem.simulator import Observation, Scene, render, to_map


def _oracle(belief, obs, eps=1e-7):
    """Per-pixel reimplementation on traverse_ray plus slab intersection."""
    spec = belief.spec
    v = obs.viewpoint
    o, dirs = v.pixel_rays()
    free = np.zeros(spec.dims, bool)
    hit = np.zeros(spec.dims, bool)
    sem = np.zeros(spec.shape2d + (spec.n_classes,), bool)
    for r in range(v.height):
        for c in range(v.width):
            d = dirs[r, c]
            if not entry_face_ok(spec, o, d):
                continue
            depth = obs.depth[r, c]
            limit = depth if np.isfinite(depth) else v.max_range
            vox = traverse_ray(spec, o, d, v.max_range)
            for i in vox:
                t0, t1 = slab(spec, o, d, i)
                if t1 <= limit + eps:
                    free[i] = True
                    continue
                if np.isfinite(depth) and t0 <= depth + eps:
                    hit[i] = True
                    sem[i[0], i[1], obs.labels[r, c]] = True
                break
            else:
                if np.isfinite(depth) and vox:
                    p = o + d * depth
                    if abs(p[2] - spec.lower[2]) < 1e-6:
                        i = vox[-1]
                        sem[i[0], i[1], obs.labels[r, c]] = True
    occ = belief.lambda_occ.copy()
    occ[..., 0] += K_OCC * hit
    occ[..., 1] += K_FREE * free
    return occ, belief.lambda_sem + K_SEM * sem


def _cam(x=0.4, z=0.2, w=24, h=18, fov=60.0):
    return Viewpoint.look_at((x, -0.3, z), (0.4, 0.2, 0.1), fov, w, h, 1.5)


def test_matches_per_pixel_oracle():
    spec = GridSpec()
    sc = Scene(spec, (box(3, 0.4, 0.12), box(5, 0.25, 0.3, h=0.2)))
    b = new_uniform_belief(spec)
    for v in (_cam(), _cam(0.1, 0.35), _cam(0.7, 0.05)):
        obs = render(sc, v)
        got = update_observation(b, obs)
        occ, lam = _oracle(b, obs)
        assert np.array_equal(got.lambda_occ, occ)
        assert np.array_equal(got.lambda_sem, lam)


def test_empty_shelf_carves_free_space():
    spec = GridSpec()
    b = update_observation(new_uniform_belief(spec), render(Scene(spec), _cam()))
    p = b.occ_mean
    touched = b.beta > 1
    assert touched.any()
    assert np.all(p[touched] < 0.5)
    assert np.all(p[~touched] == 0.5)
    assert np.all(b.alpha == 1)


def test_hit_voxels_mean(one_box_scene):
    spec = one_box_scene.spec
    b = update_observation(new_uniform_belief(spec), render(one_box_scene, _cam()))
    hit = b.alpha > 1
    assert hit.any()
    assert np.allclose(b.occ_mean[hit & (b.beta == 1)], 5 / 6)
    gt = to_map(one_box_scene)
    assert gt.occ[hit].all()
    cols = hit.any(axis=2)
    assert np.all(b.lambda_sem[cols, 3] == 1 + K_SEM)


def test_integrating_twice_doubles_evidence(one_box_scene):
    spec = one_box_scene.spec
    obs = render(one_box_scene, _cam())
    b0 = new_uniform_belief(spec)
    b1 = update_observation(b0, obs)
    b2 = update_observation(b1, obs)
    assert np.allclose(b2.lambda_occ - 1, 2 * (b1.lambda_occ - 1))
    assert np.allclose(b2.lambda_sem - 1, 2 * (b1.lambda_sem - 1))
    m = to_map(one_box_scene).occ
    touched = (b1.lambda_occ != 1).any(-1)
    err1 = np.abs(b1.occ_mean - m)[touched]
    err2 = np.abs(b2.occ_mean - m)[touched]
    assert np.all(err2 <= err1 + 1e-12)


def test_evidence_conservation(scenes_low):
    sc = scenes_low[0]
    b0 = new_uniform_belief(sc.spec)
    for v in default_viewpoints()[::11]:
        b1 = update_observation(b0, render(sc, v))
        added = (b1.lambda_occ - b0.lambda_occ).sum() + (b1.lambda_sem - b0.lambda_sem).sum()
        touched = np.count_nonzero((b1.lambda_occ != b0.lambda_occ).any(-1))
        assert added <= (K_FREE + K_OCC + K_SEM) * touched + 1e-9


def test_no_return_image_carves_only_within_range():
    spec = GridSpec()
    v = Viewpoint.look_at((0.4, -0.3, 0.2), (0.4, 0.2, 0.2), 60, 16, 12, max_range=0.5)
    obs = Observation(v, np.full((12, 16), np.inf), np.zeros((12, 16), int))
    b = update_observation(new_uniform_belief(spec), obs)
    assert np.all(b.alpha == 1) and np.all(b.lambda_sem == 1)
    idx = np.argwhere(b.beta > 1)
    centers = spec.index_to_world_center(idx)
    assert np.all(np.linalg.norm(centers - v.position, axis=1) <= 0.5 + spec.cell_size)


def test_order_independence(scenes_low):
    sc = scenes_low[1]
    obs = [render(sc, v) for v in default_viewpoints()[::15]]
    a = new_uniform_belief(sc.spec)
    b = new_uniform_belief(sc.spec)
    for o in obs:
        a = update_observation(a, o)
    for o in reversed(obs):
        b = update_observation(b, o)
    assert np.array_equal(a.lambda_occ, b.lambda_occ)
    assert np.array_equal(a.lambda_sem, b.lambda_sem)


def test_floor_hit_labels_background():
    spec = GridSpec()
    v = Viewpoint.look_at((0.4, -0.05, 0.3), (0.4, 0.15, 0.0), 20, 8, 6, 1.5)
    obs = render(Scene(spec), v)
    b = update_observation(new_uniform_belief(spec), obs)
    assert (b.lambda_sem[..., 0] > 1).any()
    assert np.all(b.lambda_sem[..., 1:] == 1)


def test_malformed_image_rejected():
    spec = GridSpec()
    v = _cam()
    obs = render(Scene(spec), v)
    bad = Observation.__new__(Observation)
    object.__setattr__(bad, "viewpoint", v)
    object.__setattr__(bad, "depth", obs.depth[:, :-1])
    object.__setattr__(bad, "labels", obs.labels[:, :-1])
    with pytest.raises(ValueError):
        update_observation(new_uniform_belief(spec), bad)
    with pytest.raises(ValueError):
        Observation(v, obs.depth[:, :-1], obs.labels)
