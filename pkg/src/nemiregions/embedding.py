"""Fuzzy-graph manifold embedding (UMAP-style) and neighbourhood-preservation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np
import scipy.sparse as sp
from scipy.optimize import curve_fit
from scipy.spatial.distance import cdist

from .grid_model import FeatureMatrix

SMOOTH_TOL = 1e-7
MIN_SIGMA_SCALE = 1e-3


@dataclass(frozen=True)
class NeighborGraph:
    knn_indices: np.ndarray
    knn_dists: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray

    @property
    def k(self) -> int:
        return self.knn_indices.shape[1]


@dataclass(frozen=True)
class FuzzyGraph:
    """Symmetric sparse membership strengths in (0, 1]."""

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def edges(self):
        coo = self.matrix.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(float)


@dataclass(frozen=True)
class EmbeddingParams:
    n_neighbors: int = 20
    min_dist: float = 0.0
    n_components: int = 3
    a: Optional[float] = None
    b: Optional[float] = None
    n_epochs: int = 500
    negative_sample_rate: int = 5
    learning_rate: float = 1.0
    seed: int = 0

    def validate(self, n: int) -> None:
        if not 2 <= self.n_neighbors < n:
            raise ValueError(f"n_neighbors must satisfy 2 <= k < n={n}, got {self.n_neighbors}")
        if self.min_dist < 0:
            raise ValueError("min_dist must be non-negative")
        if self.n_components < 1 or self.n_epochs < 1:
            raise ValueError("n_components and n_epochs must be positive")


@dataclass(frozen=True)
class Embedding:
    coords: np.ndarray
    params: EmbeddingParams
    final_cross_entropy: float


def _as_array(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        X = X.values
    elif isinstance(X, Embedding):
        X = X.coords
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


# --- neighbour graph -----------------------------------------------------

def _smooth_sigma(dists: np.ndarray, rho: np.ndarray, target: float, n_iter: int = 256):
    """Bisection for sigma so that sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = target."""
    n = dists.shape[0]
    shifted = np.maximum(dists - rho[:, None], 0.0)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    done = np.zeros(n, dtype=bool)
    for _ in range(n_iter):
        total = np.exp(-shifted / mid[:, None]).sum(axis=1)
        done |= np.abs(total - target) < SMOOTH_TOL
        if done.all():
            break
        up = (total > target) & ~done
        down = (total <= target) & ~done
        hi[up] = mid[up]
        mid[up] = (lo[up] + hi[up]) / 2.0
        lo[down] = mid[down]
        grow = down & np.isinf(hi)
        mid[grow] *= 2.0
        fin = down & ~np.isinf(hi)
        mid[fin] = (lo[fin] + hi[fin]) / 2.0
    # unconverged rows have more terms tied at rho than the target allows;
    # keep their bandwidth away from zero
    floor = MIN_SIGMA_SCALE * dists.mean(axis=1)
    global_floor = MIN_SIGMA_SCALE * (dists.mean() if dists.size and dists.mean() > 0 else 1.0)
    floor = np.where(floor > 0, floor, global_floor)
    stuck = ~done
    mid[stuck] = np.maximum(mid[stuck], floor[stuck])
    return mid


def knn_graph(X, k: int, chunk: int = 1024) -> NeighborGraph:
    """Exact Euclidean k nearest neighbours (self excluded) and fuzzy bandwidths."""
    X = _as_array(X)
    if np.isnan(X).any():
        raise ValueError("feature matrix contains missing values")
    n = X.shape[0]
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of points {n}")
    if k < 1:
        raise ValueError("k must be positive")
    idx = np.empty((n, k), dtype=np.int64)
    dst = np.empty((n, k))
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        D = cdist(X[rows], X)
        D[np.arange(rows.size), rows] = np.inf
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        idx[rows] = order
        dst[rows] = np.take_along_axis(D, order, axis=1)
    rho = dst[:, 0].copy()
    sigma = _smooth_sigma(dst, rho, math.log2(k))
    return NeighborGraph(idx, dst, rho, sigma)


def fuzzy_graph(graph: NeighborGraph) -> FuzzyGraph:
    """Directed memberships symmetrised by fuzzy union a + b - a*b."""
    n, k = graph.knn_indices.shape
    w = np.exp(-np.maximum(graph.knn_dists - graph.rho[:, None], 0.0) / graph.sigma[:, None])
    rows = np.repeat(np.arange(n), k)
    P = sp.csr_matrix((w.ravel(), (rows, graph.knn_indices.ravel())), shape=(n, n))
    Pt = P.T.tocsr()
    S = (P + Pt - P.multiply(Pt)).tocsr()
    S.eliminate_zeros()
    S.sort_indices()
    return FuzzyGraph(S)


# --- low-dimensional curve -----------------------------------------------

def _psi(d, a, b):
    return 1.0 / (1.0 + a * d ** (2.0 * b))


def ab_target(min_dist: float, spread: float = 1.0):
    d = np.linspace(0.0, 3.0 * spread, 301)[1:]
    y = np.where(d <= min_dist, 1.0, np.exp(-(d - min_dist) / spread))
    return d, y


def fit_ab(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of 1 / (1 + a d^(2b)) to the min_dist-shifted exponential."""
    if min_dist < 0:
        raise ValueError("min_dist must be non-negative")
    d, y = ab_target(min_dist, spread)
    (a, b), _ = curve_fit(_psi, d, y, p0=(1.0, 1.0), maxfev=10000)
    return float(a), float(b)


# --- optimisation --------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _clip(v):
    if v > 4.0:
        return 4.0
    if v < -4.0:
        return -4.0
    return v


@numba.njit(cache=True, nogil=True)
def _sgd(emb, head, tail, epochs_per_sample, a, b, n_epochs, neg_rate, lr, seed):
    np.random.seed(seed)
    n_vertices, dim = emb.shape
    n_edges = head.shape[0]
    eps_neg = epochs_per_sample / neg_rate
    next_sample = epochs_per_sample.copy()
    next_neg = eps_neg.copy()
    for epoch in range(n_epochs):
        alpha = lr * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if epochs_per_sample[e] <= 0 or next_sample[e] > epoch:
                continue
            j = head[e]
            k = tail[e]
            dist_sq = 0.0
            for d in range(dim):
                diff = emb[j, d] - emb[k, d]
                dist_sq += diff * diff
            if dist_sq > 0.0:
                pb = dist_sq ** b
                coeff = -2.0 * a * b * (pb / dist_sq) / (a * pb + 1.0)
            else:
                coeff = 0.0
            for d in range(dim):
                g = _clip(coeff * (emb[j, d] - emb[k, d])) * alpha
                emb[j, d] += g
                emb[k, d] -= g
            next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - next_neg[e]) / eps_neg[e])
            for _ in range(n_neg):
                k = np.random.randint(n_vertices)
                if k == j:
                    continue
                dist_sq = 0.0
                for d in range(dim):
                    diff = emb[j, d] - emb[k, d]
                    dist_sq += diff * diff
                if dist_sq > 0.0:
                    coeff = 2.0 * b / ((0.001 + dist_sq) * (a * dist_sq ** b + 1.0))
                else:
                    coeff = 0.0
                for d in range(dim):
                    if coeff > 0.0:
                        g = _clip(coeff * (emb[j, d] - emb[k, d]))
                    else:
                        g = 4.0
                    emb[j, d] += g * alpha
            next_neg[e] += n_neg * eps_neg[e]
    return emb


def cross_entropy(graph: FuzzyGraph, coords: np.ndarray, a: float, b: float,
                  seed: int = 0, n_negative: Optional[int] = None) -> float:
    """Fuzzy-set cross-entropy between graph memberships and the embedding.

    Edge terms are exact; the sum over non-edges (membership 0) is estimated
    from uniformly sampled pairs and scaled to the number of non-edges.
    """
    eps = 1e-12
    upper = sp.triu(graph.matrix, k=1).tocoo()
    mu = upper.data
    d = np.linalg.norm(coords[upper.row] - coords[upper.col], axis=1)
    nu = np.clip(_psi(d, a, b), eps, 1.0 - eps)
    mu_c = np.clip(mu, eps, 1.0)
    edge = mu * np.log(mu_c / nu)
    one_minus = 1.0 - mu
    edge += np.where(one_minus > 0, one_minus * np.log(np.maximum(one_minus, eps) / (1.0 - nu)), 0.0)
    total = float(edge.sum())

    n = coords.shape[0]
    n_pairs = n * (n - 1) // 2
    n_nonedges = n_pairs - mu.size
    if n_nonedges > 0:
        m = n_negative or min(n_nonedges, 20 * n)
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=m)
        j = rng.integers(0, n - 1, size=m)
        j = j + (j >= i)
        keep = np.asarray(graph.matrix[i, j]).ravel() == 0
        if keep.any():
            dn = np.linalg.norm(coords[i[keep]] - coords[j[keep]], axis=1)
            nun = np.clip(_psi(dn, a, b), eps, 1.0 - eps)
            total += float(-np.log1p(-nun).mean()) * n_nonedges
    return total


def pca_init(X, n_components: int, seed: int = 0) -> np.ndarray:
    """Projection onto the leading principal axes by orthogonal power iteration.

    Coordinates are scaled to a maximum magnitude of 10. Falls back to seeded
    uniform noise in [-10, 10] when the data span fewer than ``n_components``
    directions.
    """
    X = _as_array(X)
    n, d = X.shape
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc
    if d >= n_components and n > n_components and np.isfinite(cov).all():
        Q = np.eye(d)[:, :n_components]
        for _ in range(300):
            Q_new, _ = np.linalg.qr(cov @ Q)
            if np.allclose(np.abs(Q_new.T @ Q).diagonal(), 1.0, atol=1e-13, rtol=0):
                Q = Q_new
                break
            Q = Q_new
        evals = np.einsum("ij,ij->j", Q, cov @ Q)
        top = evals.max() if evals.size else 0.0
        if top > 0 and evals.min() > 1e-10 * top:
            for c in range(n_components):
                if Q[np.argmax(np.abs(Q[:, c])), c] < 0:
                    Q[:, c] = -Q[:, c]
            coords = Xc @ Q
            return 10.0 * coords / np.abs(coords).max()
    rng = np.random.default_rng(seed)
    return rng.uniform(-10.0, 10.0, size=(n, n_components))


def optimize_embedding(graph: FuzzyGraph, params: EmbeddingParams,
                       init: Optional[np.ndarray] = None) -> Embedding:
    """Negative-sampling SGD on the fuzzy cross-entropy; learning rate decays linearly to 0."""
    n = graph.n
    if n < 2:
        raise ValueError("need at least two points")
    a, b = params.a, params.b
    if a is None or b is None:
        a, b = fit_ab(params.min_dist)
        params = replace(params, a=a, b=b)
    if init is None:
        init = np.random.default_rng(params.seed).uniform(-10.0, 10.0, size=(n, params.n_components))
    emb = np.array(init, dtype=np.float64, order="C", copy=True)

    head, tail, w = graph.edges()
    w = w.copy()
    w[w < w.max() / float(params.n_epochs)] = 0.0
    n_samples = params.n_epochs * (w / w.max())
    eps = np.full(w.shape, -1.0)
    eps[n_samples > 0] = params.n_epochs / n_samples[n_samples > 0]

    _sgd(emb, head, tail, eps, float(a), float(b), int(params.n_epochs),
         float(params.negative_sample_rate), float(params.learning_rate),
         int(params.seed) & 0xFFFFFFFF)
    ce = cross_entropy(graph, emb, a, b, seed=params.seed)
    return Embedding(emb, params, ce)


def embed(X, params: EmbeddingParams = EmbeddingParams()) -> Embedding:
    """kNN graph -> fuzzy union -> curve fit -> PCA init -> SGD."""
    X = _as_array(X)
    n = X.shape[0]
    if params.n_neighbors >= n:
        raise ValueError(f"k={params.n_neighbors} must be smaller than the number of points {n}")
    params.validate(n)
    graph = fuzzy_graph(knn_graph(X, params.n_neighbors))
    if params.a is None or params.b is None:
        a, b = fit_ab(params.min_dist)
        params = replace(params, a=a, b=b)
    init = pca_init(X, params.n_components, params.seed)
    return optimize_embedding(graph, params, init)


# --- quality metrics -----------------------------------------------------

def _ranks(X, rows):
    """Neighbour ranks from each row point: self 0, nearest 1, ... (ties by index)."""
    D = cdist(X[rows], X)
    D[np.arange(len(rows)), rows] = -np.inf
    order = np.argsort(D, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(X.shape[0])[None, :].repeat(len(rows), 0), axis=1)
    return ranks, order


def _rank_penalty(high, low, K, chunk=512):
    """Trustworthiness-style score: penalise ``low``-space neighbours that rank far in ``high``."""
    high, low = _as_array(high), _as_array(low)
    n = high.shape[0]
    if low.shape[0] != n:
        raise ValueError("point counts differ")
    if not 1 <= K < n / 2:
        raise ValueError(f"K={K} must satisfy 1 <= K < n/2 (n={n})")
    total = 0
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        r_high, _ = _ranks(high, rows)
        _, o_low = _ranks(low, rows)
        nb_low = o_low[:, 1:K + 1]
        r = np.take_along_axis(r_high, nb_low, axis=1)
        total += int(np.where(r > K, r - K, 0).sum())
    return 1.0 - 2.0 / (n * K * (2.0 * n - 3.0 * K - 1.0)) * total


def trustworthiness(X, E, K: int = 15) -> float:
    """Penalises embedding neighbours that are not neighbours in the original space."""
    return _rank_penalty(X, E, K)


def continuity(X, E, K: int = 15) -> float:
    """Penalises original-space neighbours that are lost in the embedding."""
    return _rank_penalty(E, X, K)


def coranking_matrix(X, E) -> np.ndarray:
    X, E = _as_array(X), _as_array(E)
    m = X.shape[0]
    rows = np.arange(m)
    rx, _ = _ranks(X, rows)
    re, _ = _ranks(E, rows)
    off = ~np.eye(m, dtype=bool)
    flat = (rx[off] - 1) * (m - 1) + (re[off] - 1)
    return np.bincount(flat, minlength=(m - 1) ** 2).reshape(m - 1, m - 1)


def q_nx_curve(X, E) -> np.ndarray:
    """Q_NX(K) for K = 1..m-1 (index 0 holds K = 1)."""
    Q = coranking_matrix(X, E)
    m = Q.shape[0] + 1
    C = Q.cumsum(axis=0).cumsum(axis=1)
    K = np.arange(1, m)
    return C[K - 1, K - 1] / (K * m)


def coranking_q(X, E, sample_size: int = 2000, seed: int = 0) -> tuple[float, float]:
    """(Qlocal, Qglobal): mean Q_NX below and above the LCMC maximum.

    The split K* is the first argmax of LCMC(K) = Q_NX(K) - K/(m-1). The
    trivial K = m-1 (always 1) is left out of the global average.
    """
    X, E = _as_array(X), _as_array(E)
    n = X.shape[0]
    if n > sample_size:
        idx = np.sort(np.random.default_rng(seed).choice(n, sample_size, replace=False))
        X, E = X[idx], E[idx]
    m = X.shape[0]
    if m < 3:
        raise ValueError("need at least three points")
    q = q_nx_curve(X, E)
    K = np.arange(1, m)
    lcmc = q - K / (m - 1)
    k_star = int(np.argmax(lcmc[:-1])) + 1
    q_local = float(q[:k_star].mean())
    upper = q[k_star:m - 2]
    q_global = float(upper.mean()) if upper.size else float(q[k_star:].mean())
    return q_local, q_global


def shepard_pairs(X, E, sample_pairs: int, seed: int = 0) -> np.ndarray:
    """Uniformly sampled point pairs as rows of (original distance, embedded distance)."""
    X, E = _as_array(X), _as_array(E)
    if sample_pairs < 1:
        raise ValueError("sample_pairs must be positive")
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=sample_pairs)
    j = rng.integers(0, n - 1, size=sample_pairs)
    j = j + (j >= i)
    return np.column_stack([np.linalg.norm(X[i] - X[j], axis=1),
                            np.linalg.norm(E[i] - E[j], axis=1)])
