"""Rigid alignment of point clouds (ICP) to compare embeddings from different runs."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray
    mirrored: bool = False

    def apply(self, P: np.ndarray) -> np.ndarray:
        return np.asarray(P, dtype=float) @ self.rotation.T + self.translation

    def then(self, other: "RigidTransform") -> "RigidTransform":
        """Composition: apply ``self`` first, then ``other``."""
        R = other.rotation @ self.rotation
        t = other.rotation @ self.translation + other.translation
        return RigidTransform(R, t, bool(np.linalg.det(R) < 0))

    @classmethod
    def identity(cls, dim: int) -> "RigidTransform":
        return cls(np.eye(dim), np.zeros(dim), False)


def _check_cloud(P, name):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] < 3:
        raise ValueError(f"{name} needs at least three points")
    if np.linalg.matrix_rank(P - P.mean(axis=0)) < 2:
        raise ValueError(f"{name} is degenerate (rank < 2)")
    return P


def procrustes(P: np.ndarray, Q: np.ndarray) -> RigidTransform:
    """Least-squares proper rotation and translation mapping rows of P onto rows of Q."""
    cp, cq = P.mean(axis=0), Q.mean(axis=0)
    H = (P - cp).T @ (Q - cq)
    U, _, Vt = np.linalg.svd(H)
    S = np.eye(P.shape[1])
    if np.linalg.det(Vt.T @ U.T) < 0:
        S[-1, -1] = -1.0
    R = Vt.T @ S @ U.T
    return RigidTransform(R, cq - R @ cp, False)


def icp(P, Q, max_iter: int = 100, tol: float = 1e-12, return_trace: bool = False):
    """Iterative closest point from P (moving) to Q (fixed).

    Alternates nearest-neighbour matching (many-to-one allowed) with a
    Procrustes fit; stops when the RMSE improves by less than ``tol``.
    Returns ``(transform, rmse)`` and, on request, the RMSE per iteration.
    """
    P = _check_cloud(P, "P")
    Q = _check_cloud(Q, "Q")
    if P.shape[1] != Q.shape[1]:
        raise ValueError("clouds differ in dimension")
    tree = cKDTree(Q)
    total = RigidTransform.identity(P.shape[1])
    current = P
    dist, idx = tree.query(current)
    rmse = float(np.sqrt(np.mean(dist ** 2)))
    trace = [rmse]
    for _ in range(max_iter):
        step = procrustes(current, Q[idx])
        moved = step.apply(current)
        d_new, i_new = tree.query(moved)
        r_new = float(np.sqrt(np.mean(d_new ** 2)))
        if r_new > rmse:
            break  # rounding only; the fit cannot increase the error
        total = total.then(step)
        current, dist, idx = moved, d_new, i_new
        improvement = rmse - r_new
        rmse = r_new
        trace.append(rmse)
        if improvement < tol:
            break
    if return_trace:
        return total, rmse, trace
    return total, rmse


def _rotation_90(dim, i, j):
    R = np.eye(dim)
    R[i, i] = R[j, j] = 0.0
    R[i, j], R[j, i] = -1.0, 1.0
    return R


def pre_transforms(dim: int) -> list[np.ndarray]:
    """Axis mirrors (all sign patterns) plus four axis-aligned rotations for 3-D.

    For 3-D these are the 8 diagonal sign matrices, 90-degree turns about
    x, y and z, and the cyclic axis permutation.
    """
    mats = [np.diag(s) for s in itertools.product((1.0, -1.0), repeat=dim)]
    if dim == 3:
        mats += [_rotation_90(3, 1, 2), _rotation_90(3, 2, 0), _rotation_90(3, 0, 1),
                 np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])]
    return mats


def best_alignment(P, Q, max_iter: int = 100, tol: float = 1e-12) -> tuple[RigidTransform, float]:
    """Centroid pre-alignment, then ICP from every pre-transform; keeps the lowest RMSE."""
    P = _check_cloud(P, "P")
    Q = _check_cloud(Q, "Q")
    cp, cq = P.mean(axis=0), Q.mean(axis=0)
    best = None
    for M in pre_transforms(P.shape[1]):
        pre = RigidTransform(M, cq - M @ cp, bool(np.linalg.det(M) < 0))
        T, rmse = icp(pre.apply(P), Q, max_iter, tol)
        if best is None or rmse < best[1]:
            best = (pre.then(T), rmse)
    return best


def best_alignment_rmse(P, Q, max_iter: int = 100, tol: float = 1e-12) -> float:
    return best_alignment(P, Q, max_iter, tol)[1]
