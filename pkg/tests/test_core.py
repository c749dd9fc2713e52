import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shelfmem.core import (EvidentialBelief, GridSpec, SemanticMap, Viewpoint, bernoulli_entropy,
                           categorical_entropy, default_viewpoints, most_likely_map,
                           new_uniform_belief, semantic_entropy)
from shelfmem.raycast import traverse_ray


def test_uniform_belief_small():
    spec = GridSpec(dims=(2, 2, 1), n_classes=3)
    b = new_uniform_belief(spec)
    assert np.all(b.occ_mean == 0.5)
    assert np.allclose(b.sem_mean, 1 / 3)


def test_zero_cell_size_rejected():
    with pytest.raises(ValueError):
        GridSpec(cell_size=0.0)
    with pytest.raises(ValueError):
        GridSpec.from_extent(cell_size=0.0)


def test_default_shelf_dims():
    # 0.8 x 0.4 x 0.4 m shelf board at 2 cm
    assert GridSpec.from_extent((0.8, 0.4, 0.4), 0.02).dims == (40, 20, 20)
    assert GridSpec().dims == (40, 20, 20)


@pytest.mark.parametrize("bad", [dict(dims=(0, 1, 1)), dict(n_classes=1),
                                 dict(cell_size=-1.0), dict(dims=(1, 1))])
def test_gridspec_invariants(bad):
    with pytest.raises(ValueError):
        GridSpec(**bad)


def test_belief_floor_and_shape_checks():
    spec = GridSpec(dims=(2, 1, 1), n_classes=2)
    b = EvidentialBelief(spec, np.full((2, 1, 1, 2), 0.3), np.zeros((2, 1, 2)))
    assert b.lambda_occ.min() == 1.0 and b.lambda_sem.min() == 1.0
    with pytest.raises(ValueError):
        b.lambda_occ[0, 0, 0, 0] = 5.0
    with pytest.raises(ValueError):
        EvidentialBelief(spec, np.ones((2, 1, 2, 2)), np.ones((2, 1, 2)))
    with pytest.raises(ValueError):
        EvidentialBelief(spec, np.full((2, 1, 1, 2), np.inf), np.ones((2, 1, 2)))


def test_bernoulli_entropy_values():
    assert bernoulli_entropy(0.5) == pytest.approx(math.log(2))
    assert bernoulli_entropy(0.0) == 0.0
    assert bernoulli_entropy(1.0) == 0.0
    # hand value: -0.25 ln 0.25 - 0.75 ln 0.75
    assert bernoulli_entropy(0.25) == pytest.approx(0.5623351446, abs=1e-9)
    with pytest.raises(ValueError):
        bernoulli_entropy(1.5)


@given(st.floats(0, 1))
def test_bernoulli_entropy_bounds(p):
    h = bernoulli_entropy(p)
    assert 0 <= h <= math.log(2) + 1e-15


@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=15))
def test_categorical_entropy_bounds(w):
    p = np.array(w) / np.sum(w)
    h = categorical_entropy(p)
    assert -1e-12 <= h <= math.log(len(w)) + 1e-12


def test_semantic_entropy_examples():
    spec = GridSpec(dims=(2, 2, 1), n_classes=3)
    assert semantic_entropy(new_uniform_belief(spec)) == pytest.approx(4 * math.log(3))
    sem = np.ones((2, 2, 3))
    sem[..., 2] = 1e6
    b = EvidentialBelief(spec, np.ones((2, 2, 1, 2)), sem)
    assert semantic_entropy(b) < 1e-3
    one = GridSpec(dims=(1, 1, 1), n_classes=3)
    b = EvidentialBelief(one, np.ones((1, 1, 1, 2)), np.array([[[2.0, 1.0, 1.0]]]))
    assert semantic_entropy(b) == pytest.approx(math.log(2) + 0.5 * math.log(2), abs=1e-4)


def test_most_likely_map_examples():
    spec = GridSpec(dims=(1, 1, 2), n_classes=3)
    m = most_likely_map(new_uniform_belief(spec))
    assert not m.occ.any() and m.sem[0, 0] == 0
    occ = np.ones((1, 1, 2, 2))
    occ[0, 0, 0] = (5, 1)
    b = EvidentialBelief(spec, occ, np.array([[[2.0, 2.0, 1.0]]]))
    m = most_likely_map(b)
    assert m.occ[0, 0, 0] and not m.occ[0, 0, 1]
    assert m.sem[0, 0] == 0
    b = EvidentialBelief(spec, occ, np.array([[[1.0, 2.0, 2.0]]]))
    assert most_likely_map(b).sem[0, 0] == 1


def test_most_likely_map_empty_column_is_background():
    spec = GridSpec(dims=(2, 1, 1), n_classes=3)
    occ = np.ones((2, 1, 1, 2))
    occ[0, 0, 0] = (3, 1)
    sem = np.ones((2, 1, 3))
    sem[:, :, 2] = 10
    m = most_likely_map(EvidentialBelief(spec, occ, sem))
    assert m.sem.tolist() == [[2], [0]]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 1e3))
def test_most_likely_map_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    spec = GridSpec(dims=(3, 2, 2), n_classes=5)
    occ = 1 + rng.integers(0, 5, (3, 2, 2, 2)).astype(float)
    sem = 1 + rng.integers(0, 5, (3, 2, 5)).astype(float)
    a = most_likely_map(EvidentialBelief(spec, occ, sem))
    b = most_likely_map(EvidentialBelief(spec, occ, sem * c if c >= 1 else sem))
    assert np.array_equal(a.sem, b.sem) and np.array_equal(a.occ, b.occ)


def test_semantic_map_validation():
    with pytest.raises(ValueError):
        SemanticMap(np.zeros((2, 2, 1), bool), np.full((2, 2), 20), 15)
    with pytest.raises(ValueError):
        SemanticMap(np.zeros((2, 2, 1), bool), np.zeros((3, 2), int))


@settings(max_examples=100, deadline=None)
@given(st.tuples(st.integers(0, 39), st.integers(0, 19), st.integers(0, 19)))
def test_index_round_trip(i):
    spec = GridSpec(origin=(0.1, -0.3, 0.7))
    assert tuple(spec.world_to_index(spec.index_to_world_center(i))) == i


def test_traverse_axis_column():
    spec = GridSpec(dims=(1, 1, 5), n_classes=2)
    vox = traverse_ray(spec, (0.01, 0.01, -0.5), (0, 0, 1), 2.0)
    assert vox == [(0, 0, k) for k in range(5)]


def test_traverse_miss():
    spec = GridSpec(dims=(3, 3, 3), n_classes=2)
    assert traverse_ray(spec, (-1, -1, -1), (-1, 0, 0), 5.0) == []
    with pytest.raises(ValueError):
        traverse_ray(spec, (0, 0, 0), (0, 0, 0), 1.0)


def _dense_voxels(spec, o, d, t_max):
    """Voxels visited by points every cell_size/100 along the ray (oracle)."""
    d = np.asarray(d, float) / np.linalg.norm(d)
    ts = np.arange(0, t_max, spec.cell_size / 100)
    idx = spec.world_to_index(np.asarray(o) + ts[:, None] * d)
    idx = idx[spec.in_bounds(idx)]
    out = []
    for i in map(tuple, idx):
        if not out or out[-1] != i:
            out.append(i)
    return out


def test_traverse_diagonal_vs_dense_sampling():
    spec = GridSpec(dims=(3, 3, 1), n_classes=2)
    # exact corner-to-corner diagonal: dense samples skip the tie voxels but must
    # appear in order, and the exact walk stays 6-connected
    o, d = (0.0, 0.0, 0.01), (1.0, 1.0, 0.0)
    vox = traverse_ray(spec, o, d, 1.0)
    dense = _dense_voxels(spec, o, d, 0.1)
    assert dense == [(0, 0, 0), (1, 1, 0), (2, 2, 0)]
    assert [v for v in vox if v in dense] == dense
    assert vox[0] == (0, 0, 0) and vox[-1] == (2, 2, 0)
    # slightly off the diagonal the two must agree exactly
    for o, d in [((0.0005, 0.0, 0.01), (1.0, 1.0, 0.0)), ((0.0, 0.0007, 0.01), (1.0, 0.97, 0.0)),
                 ((0.001, 0.001, 0.001), (0.9, 1.0, 0.3))]:
        assert traverse_ray(spec, o, d, 1.0) == _dense_voxels(spec, o, d, 1.0)


ray_start = st.tuples(st.floats(-0.5, 1.3), st.floats(-0.5, 0.9), st.floats(-0.5, 0.9))
ray_dir = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


@settings(max_examples=200, deadline=None)
@given(ray_start, ray_dir, st.floats(0.01, 2.0))
def test_traverse_connected_and_unique(o, d, r):
    spec = GridSpec()
    vox = traverse_ray(spec, o, d, r)
    assert len(set(vox)) == len(vox)
    for a, b in zip(vox, vox[1:]):
        assert sum(abs(x - y) for x, y in zip(a, b)) == 1


@settings(max_examples=100, deadline=None)
@given(ray_start, ray_dir)
def test_traverse_matches_dense_order(o, d):
    spec = GridSpec(dims=(6, 5, 4), n_classes=2)
    vox = traverse_ray(spec, o, d, 3.0)
    dense = _dense_voxels(spec, o, d, 3.0)
    pos = {v: k for k, v in enumerate(vox)}
    assert all(v in pos for v in dense)
    assert [pos[v] for v in dense] == sorted(pos[v] for v in dense)


def test_viewpoint_validation_and_roundtrip():
    v = default_viewpoints()[7]
    assert Viewpoint.from_dict(v.to_dict()) == v
    with pytest.raises(ValueError):
        Viewpoint((0, 0, 0), ((1, 0, 0), (0, 1, 0), (0, 0, -1)), 1, 1, 0, 0, 4, 4)
    with pytest.raises(ValueError):
        Viewpoint((0, 0, 0), ((1, 0, 0), (0, 1, 0), (0, 0, 1)), 1, 1, 0, 0, 0, 4)


def test_default_viewpoints_face_the_opening():
    spec = GridSpec()
    vs = default_viewpoints(spec)
    assert len(vs) == 60
    for v in vs:
        assert v.position[1] < spec.origin[1]
        assert v.R[1, 2] > 0  # optical axis points into the shelf
