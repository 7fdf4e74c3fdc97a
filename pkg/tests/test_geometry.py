import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from getup.errors import DataError, PreconditionError
from getup.geometry import (
    CameraIntrinsics,
    back_project,
    chamfer_distance,
    denormalize,
    knn,
    knn_graph,
    nearest_depth_discrepancy,
    normalize,
    project_points,
    select_gt_points,
)
from oracles import chamfer_oracle


def test_intrinsics_validation():
    with pytest.raises(DataError):
        CameraIntrinsics(0.0, 1.0, 0.0, 0.0)


def test_projection_examples():
    p = project_points([[0.0, 0.0, 7.0]], CameraIntrinsics(100, 100, 0, 0), 10, 10)
    assert p.coords.tolist() == [[0, 0]]
    p = project_points([[2.0, 1.0, 2.0]], CameraIntrinsics(100, 100, 50, 30), 200, 200)
    assert p.coords.tolist() == [[150, 80]]
    p = project_points([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [1e3, 0, 1.0], [0, 0, 1.0]],
                       CameraIntrinsics(100, 100, 5, 5), 10, 10)
    assert p.index.tolist() == [3]
    assert project_points(np.zeros((0, 3)), CameraIntrinsics(1, 1, 0, 0), 4, 4).index.size == 0
    with pytest.raises(PreconditionError):
        project_points([[0, 0, 1.0]], CameraIntrinsics(1, 1, 0, 0), 0, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_back_projection_round_trip(seed):
    rng = np.random.default_rng(seed)
    intr = CameraIntrinsics(*rng.uniform(20, 200, 2), *rng.uniform(0, 64, 2))
    coords = np.column_stack([rng.integers(0, 64, 30), rng.integers(0, 48, 30)])
    pts = back_project(coords, rng.uniform(0.5, 80, 30), intr)
    proj = project_points(pts, intr, 48, 64)
    assert proj.index.tolist() == list(range(30))
    assert np.array_equal(proj.coords, coords)


def test_knn_examples_and_errors():
    X = np.array([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]])
    assert knn(X, 1).tolist() == [[1], [0], [1]]
    assert knn(np.zeros((4, 3)), 2).tolist() == [[1, 2], [0, 2], [0, 1], [0, 1]]
    with pytest.raises(PreconditionError):
        knn(X, 3)


def test_knn_graph_fallback():
    idx, k_used, loop = knn_graph(np.random.default_rng(0).normal(size=(3, 3)), 4)
    assert (k_used, loop) == (2, False) and idx.shape == (3, 2)
    idx, k_used, loop = knn_graph(np.ones((1, 3)), 4)
    assert loop and idx.tolist() == [[0]]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_knn_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 3))  # continuous values: no ties almost surely
    perm = rng.permutation(12)
    inv = np.argsort(perm)
    a = knn(X, 3)
    b = knn(X[perm], 3)
    assert np.array_equal(perm[b], a[perm])
    assert np.array_equal(inv[perm], np.arange(12))


def test_chamfer_examples():
    A = np.random.default_rng(0).normal(size=(5, 3))
    assert chamfer_distance(A, A) == 0.0
    assert chamfer_distance([[0, 0, 0.0]], [[1, 0, 0.0]]) == 2.0
    B = np.random.default_rng(1).normal(size=(7, 3))
    assert chamfer_distance(A, B) == pytest.approx(chamfer_distance(B, A), abs=1e-15)
    assert abs(chamfer_distance(A, B) - chamfer_oracle(A, B)) < 1e-12
    with pytest.raises(PreconditionError):
        chamfer_distance(np.zeros((0, 3)), A)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, (6, 3), elements=st.floats(-10, 10)),
       hnp.arrays(np.float64, (4, 3), elements=st.floats(-10, 10)))
def test_chamfer_non_negative_and_zero_on_containment(a, b):
    assert chamfer_distance(a, b) >= 0
    both = np.vstack([a, a[::-1]])
    assert chamfer_distance(a, both) == 0.0


def test_select_gt_points_examples():
    radar = np.zeros((1, 3))
    lidar = np.array([[3.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
    assert select_gt_points(radar, lidar, 2).tolist() == [[1, 0, 0], [2, 0, 0]]
    assert select_gt_points(radar, lidar, 3).shape == (3, 3)
    dup = np.array([[5.0, 0, 0], [1.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
    sel, idx = select_gt_points(radar, dup, 2, return_index=True)
    assert idx.tolist() == [1, 2]
    with pytest.raises(DataError):
        select_gt_points(radar, lidar, 4)
    with pytest.raises(PreconditionError):
        select_gt_points(np.zeros((0, 3)), lidar, 1)


def test_select_gt_is_subset_and_brute_force():
    rng = np.random.default_rng(4)
    radar = rng.normal(size=(5, 6))
    lidar = rng.normal(size=(40, 3)) * 3
    sel, idx = select_gt_points(radar, lidar, 10, return_index=True)
    d = np.array([min(((l - r[:3]) ** 2).sum() for r in radar) for l in lidar])
    assert idx.tolist() == sorted(range(40), key=lambda i: (d[i], i))[:10]
    assert np.array_equal(sel, lidar[idx])


def test_normalize_examples():
    pts, tf = normalize([[0.0, 0, 0], [2.0, 0, 0]])
    assert tf.centroid.tolist() == [1, 0, 0] and tf.scale == 1.0
    assert pts.tolist() == [[-1, 0, 0], [1, 0, 0]]
    X = np.random.default_rng(5).normal(size=(20, 3)) * 30 + 7
    Y, tf = normalize(X)
    assert np.abs(denormalize(Y, tf) - X).max() < 1e-12
    assert np.sqrt((Y ** 2).sum(axis=1)).max() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DataError):
        normalize(np.ones((3, 3)))


def test_nearest_depth_discrepancy_examples():
    c = np.array([[3, 4], [10, 2]])
    d = np.array([5.0, 7.0])
    assert nearest_depth_discrepancy(c, d, c, d).tolist() == [0.0, 0.0]
    out = nearest_depth_discrepancy([[5, 5]], [13.0], [[4, 5], [8, 5]], [10.0, 30.0])
    assert out.tolist() == [3.0]
    rng = np.random.default_rng(6)
    assert nearest_depth_discrepancy(rng.integers(0, 9, (7, 2)), rng.random(7),
                                     rng.integers(0, 9, (3, 2)), rng.random(3)).shape == (7,)
    with pytest.raises(PreconditionError):
        nearest_depth_discrepancy([[0, 0]], [1.0], np.zeros((0, 2)), np.zeros(0))
