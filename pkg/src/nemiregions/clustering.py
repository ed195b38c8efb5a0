"""k-Means, agglomerative Ward and DBSCAN on Euclidean feature matrices."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

NOISE = -1


@dataclass(frozen=True)
class ClusterSet:
    """One label per point; ``NOISE`` marks unassigned points."""

    labels: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if labels.ndim != 1:
            raise ValueError("labels must be 1-D")
        if (labels < NOISE).any():
            raise ValueError("labels must be >= 0 or NOISE")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.size

    def __eq__(self, other):
        if not isinstance(other, ClusterSet):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    __hash__ = None

    @property
    def n_clusters(self) -> int:
        return int(np.unique(self.labels[self.labels != NOISE]).size)

    @property
    def noise_fraction(self) -> float:
        return float((self.labels == NOISE).mean()) if self.labels.size else 0.0

    @property
    def cluster_ids(self) -> np.ndarray:
        return np.unique(self.labels[self.labels != NOISE])

    def canonical(self) -> "ClusterSet":
        """Relabel clusters 0..k-1 in order of first occurrence."""
        out = np.full_like(self.labels, NOISE)
        mapping = {}
        for i, lab in enumerate(self.labels):
            if lab == NOISE:
                continue
            if lab not in mapping:
                mapping[lab] = len(mapping)
            out[i] = mapping[lab]
        return ClusterSet(out, self.provenance)


def as_labels(partition) -> np.ndarray:
    if isinstance(partition, ClusterSet):
        return partition.labels
    return np.asarray(partition, dtype=np.int64)


def _check_k(k, n):
    if k < 2:
        raise ValueError(f"number of clusters must be > 1, got {k}")
    if k > n:
        raise ValueError(f"number of clusters {k} exceeds number of points {n}")


# --- k-Means -------------------------------------------------------------

def _sq_dists(X, C):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(X, k, rng):
    """Greedy k-means++: each step keeps the best of several D^2-sampled candidates."""
    n = X.shape[0]
    n_trials = 2 + int(math.log(k))
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = _sq_dists(X, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            cand = np.arange(min(n_trials, n))
        else:
            cum = np.cumsum(closest)
            cand = np.searchsorted(cum, rng.random(n_trials) * total, side="right")
            cand = np.minimum(cand, n - 1)
        pots = np.minimum(closest[None, :], _sq_dists(X, X[cand]).T)
        best = int(np.argmin(pots.sum(axis=1)))
        centers[c] = X[cand[best]]
        closest = pots[best]
    return centers


def kmeans(X, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-4):
    """Lloyd's algorithm from greedy k-means++ seeding.

    Returns ``(ClusterSet, inertia)``. Iteration stops once the summed squared
    centroid shift drops below ``tol``. The per-iteration inertia is kept in
    ``provenance["inertia_trace"]``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    _check_k(k, n)
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(X, k, rng)
    trace = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d = _sq_dists(X, centers)
        labels = np.argmin(d, axis=1)
        trace.append(float(d[np.arange(n), labels].sum()))
        new = np.empty_like(centers)
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c]:
                new[c] = X[labels == c].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            # re-seed from the points farthest from their own centroid
            far = d[np.arange(n), labels]
            taken = set()
            for c in empty:
                order = np.argsort(-far, kind="stable")
                idx = next(int(i) for i in order if int(i) not in taken)
                taken.add(idx)
                new[c] = X[idx]
        shift = float(((new - centers) ** 2).sum())
        centers = new
        if shift < tol:
            break
    d = _sq_dists(X, centers)
    labels = np.argmin(d, axis=1)
    inertia = float(((X - centers[labels]) ** 2).sum())
    trace.append(inertia)
    prov = {"algorithm": "kmeans", "k": k, "seed": seed, "n_iter": n_iter,
            "inertia_trace": trace, "centers": centers}
    return ClusterSet(labels, prov), inertia


# --- Ward ----------------------------------------------------------------

@dataclass(frozen=True)
class Dendrogram:
    """Merges in height order: rows of (cluster_a, cluster_b, height, new_size).

    Leaves are 0..n-1, the cluster formed by merge ``s`` gets id ``n + s``.
    Heights are the Ward increase in within-cluster sum of squares.
    """

    merges: np.ndarray
    n_points: int

    def cut(self, k: int) -> ClusterSet:
        n = self.n_points
        if not 1 <= k <= n:
            raise ValueError(f"cannot cut {n} points into {k} clusters")
        parent = list(range(2 * n - 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for s in range(n - k):
            a, b = int(self.merges[s, 0]), int(self.merges[s, 1])
            parent[find(a)] = n + s
            parent[find(b)] = n + s
        roots = np.array([find(i) for i in range(n)])
        return ClusterSet(roots).canonical()


def ward_linkage(X) -> Dendrogram:
    """Nearest-neighbour-chain Ward clustering with Lance-Williams updates."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        return Dendrogram(np.empty((0, 4)), n)
    D = np.empty((n, n))
    for i in range(n):
        D[i] = ((X - X[i]) ** 2).sum(1)
    D *= 0.5  # Delta of two singletons is |x - y|^2 / 2
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    raw = []
    chain = []
    for _ in range(n - 1):
        if not chain:
            chain.append(int(np.flatnonzero(active)[0]))
        while True:
            a = chain[-1]
            row = np.where(active, D[a], np.inf)
            row[a] = np.inf
            b = int(np.argmin(row))
            if len(chain) > 1 and row[chain[-2]] <= row[b]:
                b = chain[-2]
            if len(chain) > 1 and b == chain[-2]:
                break
            chain.append(b)
        chain.pop()
        chain.pop()
        h = D[a, b]
        i, j = (a, b) if a < b else (b, a)
        ni, nj = size[i], size[j]
        new = ((ni + size) * D[i] + (nj + size) * D[j] - size * h) / (ni + nj + size)
        # slot i always contains leaf i, so slots double as representative leaves
        raw.append((i, j, h, ni + nj))
        active[j] = False
        D[i] = new
        D[:, i] = new
        D[i, i] = np.inf
        D[j] = np.inf
        D[:, j] = np.inf
        size[i] = ni + nj

    raw_arr = np.array(raw, dtype=float)
    order = np.argsort(raw_arr[:, 2], kind="stable")
    parent = np.arange(n)
    cluster_of = np.arange(n)  # root leaf -> current cluster id

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merges = np.empty((n - 1, 4))
    for s, r in enumerate(order):
        a, b, h, sz = raw_arr[r]
        ra, rb = find(int(a)), find(int(b))
        ca, cb = cluster_of[ra], cluster_of[rb]
        merges[s] = (min(ca, cb), max(ca, cb), h, sz)
        parent[rb] = ra
        cluster_of[ra] = n + s
    return Dendrogram(merges, n)


def ward(X, k: int):
    """Agglomerative Ward clustering cut at ``k`` clusters; returns (ClusterSet, Dendrogram)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    _check_k(k, X.shape[0])
    tree = ward_linkage(X)
    cs = tree.cut(k)
    return ClusterSet(cs.labels, {"algorithm": "ward", "k": k}), tree


# --- DBSCAN --------------------------------------------------------------

def region_query(X, epsilon):
    """Indices within ``epsilon`` of each point, self included, sorted ascending."""
    tree = cKDTree(X)
    return [np.asarray(sorted(nb), dtype=np.int64) for nb in tree.query_ball_point(X, r=epsilon)]


def dbscan(X, epsilon: float, min_samples: int, point_order: Optional[Sequence[int]] = None,
           neighbors=None) -> ClusterSet:
    """Density-based clustering with explicit visiting order.

    A point is core when at least ``min_samples`` points (itself included) lie
    within ``epsilon``. Clusters grow from unvisited core points in
    ``point_order``; a border point joins the first cluster that reaches it.
    Output labels are canonicalised by first occurrence in index order.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if min_samples < 2:
        raise ValueError("min_samples must be at least 2")
    n = X.shape[0]
    order = np.arange(n) if point_order is None else np.asarray(point_order, dtype=np.int64)
    if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
        raise ValueError("point_order must be a permutation of range(n)")
    if neighbors is None:
        neighbors = region_query(X, epsilon)
    core = np.array([len(nb) >= min_samples for nb in neighbors], dtype=bool)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    labels = np.full(n, NOISE, dtype=np.int64)
    current = 0
    for p in order:
        if labels[p] != NOISE or not core[p]:
            continue
        labels[p] = current
        queue = deque([p])
        while queue:
            q = queue.popleft()
            nb = neighbors[q]
            nb = nb[np.argsort(rank[nb], kind="stable")]
            for r in nb:
                if labels[r] == NOISE:
                    labels[r] = current
                    if core[r]:
                        queue.append(r)
        current += 1
    prov = {"algorithm": "dbscan", "epsilon": epsilon, "min_samples": min_samples,
            "core": core}
    return ClusterSet(ClusterSet(labels).canonical().labels, prov)
