import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from nemiregions.registration import (RigidTransform, best_alignment, best_alignment_rmse, icp,
                                      pre_transforms, procrustes)


def _cloud(seed, n=200):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 3)) * [5.0, 2.0, 1.0]


def test_pure_translation():
    P = _cloud(0)
    t = np.array([0.3, -0.2, 0.1])
    T, rmse = icp(P, P + t)
    assert rmse < 1e-9
    assert np.allclose(T.translation, t) and np.allclose(T.rotation, np.eye(3))


def test_thirty_degree_rotation():
    P = _cloud(1)
    R = Rotation.from_euler("z", 30, degrees=True).as_matrix()
    T, rmse = best_alignment(P, P @ R.T)
    assert rmse < 1e-6
    assert np.allclose(T.rotation, R, atol=1e-9)


def test_mirror_recovered_by_pre_transform():
    P = _cloud(2)
    Q = P * [-1.0, 1.0, 1.0] + [1.0, 2.0, 3.0]
    T, rmse = best_alignment(P, Q)
    assert rmse < 1e-6 and T.mirrored
    assert np.linalg.det(T.rotation) == pytest.approx(-1.0)
    assert np.allclose(T.apply(P), Q, atol=1e-9)


def test_pre_transform_set():
    mats = pre_transforms(3)
    assert len(mats) == 12
    for M in mats:
        assert np.allclose(M @ M.T, np.eye(3))
    assert sum(np.linalg.det(M) < 0 for M in mats) == 4


def test_procrustes_is_proper_rotation():
    rng = np.random.default_rng(3)
    P = rng.normal(size=(50, 3))
    R = procrustes(P, P * [1, 1, -1]).rotation
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_degenerate_clouds_rejected():
    line = np.outer(np.arange(10.0), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        icp(line, _cloud(0))
    with pytest.raises(ValueError):
        icp(_cloud(0)[:2], _cloud(0))
    with pytest.raises(ValueError):
        icp(_cloud(0), _cloud(0)[:, :2])


def test_self_alignment_is_zero():
    P = _cloud(4)
    assert best_alignment_rmse(P, P) == 0.0


def test_composition():
    rng = np.random.default_rng(5)
    A = RigidTransform(Rotation.random(random_state=1).as_matrix(), rng.normal(size=3))
    B = RigidTransform(Rotation.random(random_state=2).as_matrix(), rng.normal(size=3))
    P = rng.normal(size=(10, 3))
    assert np.allclose(A.then(B).apply(P), B.apply(A.apply(P)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_icp_trace_monotone_on_random_pairs(seed):
    rng = np.random.default_rng(seed)
    P, Q = rng.normal(size=(80, 3)), rng.normal(size=(90, 3))
    _, rmse, trace = icp(P, Q, return_trace=True)
    assert rmse > 0
    assert np.all(np.diff(trace) <= 0)
    assert rmse == trace[-1]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_rigid_recovery_on_random_transforms(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(150, 3)) * [4.0, 2.0, 1.0]
    R = Rotation.from_euler("xyz", rng.uniform(-25, 25, 3), degrees=True).as_matrix()
    S = np.diag(rng.choice([-1.0, 1.0], 3))
    Q = P @ (R @ S).T + rng.normal(size=3)
    assert best_alignment_rmse(P, Q) < 1e-6


def test_swapped_roles_close():
    rng = np.random.default_rng(6)
    P = rng.normal(size=(120, 3)) * [3, 2, 1]
    Q = P + rng.normal(0, 0.05, P.shape)
    assert best_alignment_rmse(P, Q) == pytest.approx(best_alignment_rmse(Q, P), rel=0.1)
