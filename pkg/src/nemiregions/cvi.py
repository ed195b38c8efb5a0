"""Cluster validity indices: CH, DB, silhouette, CDR, CVNNH and k-DBCV.

Every index drops NOISE points first and works on the remaining partition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist

from .clustering import NOISE, as_labels
from .errors import DegenerateError

CVI_NAMES = ("ch", "db", "sh", "cdr", "cvnnh", "kdbcv")


def _prepare(X, partition):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = as_labels(partition)
    if labels.shape[0] != X.shape[0]:
        raise ValueError("labels and points differ in length")
    keep = labels != NOISE
    _, compact = np.unique(labels[keep], return_inverse=True)
    return X[keep], compact.astype(np.int64)


@dataclass(frozen=True)
class PartitionGeometry:
    centroids: np.ndarray
    center: np.ndarray
    sizes: np.ndarray
    trace_w: float
    trace_b: float
    scatter: np.ndarray  # mean distance of members to their centroid
    centroid_dists: np.ndarray

    @classmethod
    def from_points(cls, X, labels) -> "PartitionGeometry":
        k = int(labels.max()) + 1 if labels.size else 0
        sizes = np.bincount(labels, minlength=k)
        sums = np.zeros((k, X.shape[1]))
        np.add.at(sums, labels, X)
        centroids = sums / sizes[:, None]
        center = X.mean(axis=0)
        resid = X - centroids[labels]
        trace_w = float((resid ** 2).sum())
        trace_b = float((sizes * ((centroids - center) ** 2).sum(1)).sum())
        scatter = np.bincount(labels, weights=np.linalg.norm(resid, axis=1), minlength=k) / sizes
        return cls(centroids, center, sizes, trace_w, trace_b, scatter, cdist(centroids, centroids))


def calinski_harabasz(X, partition) -> float:
    """Between/within dispersion ratio scaled by (n - k) / (k - 1)."""
    X, labels = _prepare(X, partition)
    n = X.shape[0]
    k = int(labels.max()) + 1 if n else 0
    if not 2 <= k <= n - 1:
        raise ValueError(f"need 2 <= k <= n-1, got k={k}, n={n}")
    g = PartitionGeometry.from_points(X, labels)
    if g.trace_w == 0:
        raise DegenerateError("within-cluster dispersion is zero")
    return g.trace_b / g.trace_w * (n - k) / (k - 1)


def davies_bouldin(X, partition) -> float:
    """Mean over clusters of the worst (s_i + s_j) / d_ij ratio."""
    X, labels = _prepare(X, partition)
    k = int(labels.max()) + 1 if labels.size else 0
    if k < 2:
        raise ValueError(f"need at least two clusters, got {k}")
    g = PartitionGeometry.from_points(X, labels)
    d = g.centroid_dists
    off = ~np.eye(k, dtype=bool)
    if (d[off] == 0).any():
        raise DegenerateError("two clusters share a centroid")
    ratio = (g.scatter[:, None] + g.scatter[None, :]) / np.where(off, d, 1.0)
    ratio[~off] = -np.inf
    return float(ratio.max(axis=1).mean())


def silhouette_samples(X, partition, chunk: int = 2048) -> np.ndarray:
    X, labels = _prepare(X, partition)
    n = X.shape[0]
    k = int(labels.max()) + 1 if n else 0
    if not 2 <= k <= n - 1:
        raise ValueError(f"need 2 <= k <= n-1, got k={k}, n={n}")
    sizes = np.bincount(labels, minlength=k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    s = np.empty(n)
    for start in range(0, n, chunk):
        rows = slice(start, min(n, start + chunk))
        sums = cdist(X[rows], X) @ onehot
        own = labels[rows]
        m = sums.shape[0]
        own_size = sizes[own]
        a = sums[np.arange(m), own] / np.maximum(own_size - 1, 1)
        means = sums / sizes[None, :]
        means[np.arange(m), own] = np.inf
        b = means.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(denom > 0, (b - a) / denom, 0.0)
        s[rows] = np.where(own_size > 1, val, 0.0)
    return s


def silhouette(X, partition) -> float:
    """Mean silhouette over points from pairwise distances; singletons score 0."""
    return float(silhouette_samples(X, partition).mean())


def local_density(X, labels) -> np.ndarray:
    """Distance to the nearest other member of the same cluster (NaN for singletons)."""
    out = np.full(X.shape[0], np.nan)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            continue
        dist, _ = cKDTree(X[idx]).query(X[idx], k=2)
        out[idx] = dist[:, 1]
    return out


def cdr(X, partition) -> float:
    """Size-weighted uniformity of local density within clusters (0 is perfectly even)."""
    X, labels = _prepare(X, partition)
    n = X.shape[0]
    if n == 0:
        raise ValueError("no non-noise points")
    dens = local_density(X, labels)
    total = 0.0
    for c in np.unique(labels):
        idx = labels == c
        nq = int(idx.sum())
        if nq < 2:
            continue
        ld = dens[idx]
        avg = ld.mean()
        unif = np.abs(ld - avg).sum() / avg if avg > 0 else 0.0
        total += nq * unif
    return total / n


def cvnnh(X, partition, K: int = 10) -> float:
    """Separation (worst mean foreign fraction in K-neighbourhoods) plus compactness."""
    X, labels = _prepare(X, partition)
    n = X.shape[0]
    if not 1 <= K < n:
        raise ValueError(f"need 1 <= K < n, got K={K}, n={n}")
    _, nb = cKDTree(X).query(X, k=K + 1)
    # drop self; with duplicates the query may not return self first
    neigh = np.empty((n, K), dtype=np.int64)
    for i in range(n):
        row = nb[i][nb[i] != i][:K]
        neigh[i] = row
    foreign = (labels[neigh] != labels[:, None]).sum(axis=1) / K
    k = int(labels.max()) + 1
    sizes = np.bincount(labels, minlength=k)
    sep = float((np.bincount(labels, weights=foreign, minlength=k) / sizes).max())

    num = 0.0
    den = 0
    for c in range(k):
        idx = np.flatnonzero(labels == c)
        nq = idx.size
        if nq < 2:
            continue
        num += 2.0 * pdist(X[idx]).sum()
        den += nq * (nq - 1)
    comp = num / den if den else 0.0
    return sep + comp


def _core_distances(X, labels, f, zero_dist):
    core = np.empty(X.shape[0])
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        D = cdist(X[idx], X[idx])
        np.fill_diagonal(D, np.nan)
        D = np.where(D == 0, zero_dist, D)
        with np.errstate(over="ignore"):
            inv = np.nansum((1.0 / D) ** f, axis=1) / (idx.size - 1)
        core[idx] = inv ** (-1.0 / f)
    return core


def kdbcv(X, partition) -> float:
    """Density-based validity: size-weighted (separation - sparseness) / max of the two.

    Sparseness is the largest edge of a cluster's mutual-reachability MST,
    separation the smallest mutual-reachability distance to another cluster.
    Returns -1 when every point is noise.
    """
    labels_in = as_labels(partition)
    if labels_in.size and (labels_in == NOISE).all():
        return -1.0
    X, labels = _prepare(X, partition)
    n, f = X.shape
    k = int(labels.max()) + 1 if n else 0
    if k < 2:
        raise ValueError(f"need at least two clusters, got {k}")
    sizes = np.bincount(labels, minlength=k)
    if (sizes < 2).any():
        raise ValueError("every cluster needs at least two points")
    positive = pdist(X)
    positive = positive[positive > 0]
    zero_dist = positive.min() * 1e-6 if positive.size else 1e-12
    core = _core_distances(X, labels, f, zero_dist)

    spars = np.empty(k)
    members = [np.flatnonzero(labels == c) for c in range(k)]
    for c, idx in enumerate(members):
        mrd = np.maximum(cdist(X[idx], X[idx]), np.maximum(core[idx][:, None], core[idx][None, :]))
        np.fill_diagonal(mrd, 0.0)
        mst = minimum_spanning_tree(mrd)
        spars[c] = mst.data.max() if mst.nnz else 0.0

    sep = np.full(k, np.inf)
    for c in range(k):
        for d in range(c + 1, k):
            a, b = members[c], members[d]
            mrd = np.maximum(cdist(X[a], X[b]), np.maximum(core[a][:, None], core[b][None, :]))
            m = mrd.min()
            sep[c] = min(sep[c], m)
            sep[d] = min(sep[d], m)

    denom = np.maximum(sep, spars)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(denom > 0, (sep - spars) / denom, 0.0)
    return float((sizes * v).sum() / n)


SCORERS = {
    "ch": lambda X, p, k: calinski_harabasz(X, p),
    "db": lambda X, p, k: davies_bouldin(X, p),
    "sh": lambda X, p, k: silhouette(X, p),
    "cdr": lambda X, p, k: cdr(X, p),
    "cvnnh": cvnnh,
    "kdbcv": lambda X, p, k: kdbcv(X, p),
}


def all_scores(X, partition, cvnnh_k: int = 10) -> dict:
    """All six indices; undefined ones come back as NaN."""
    out = {}
    for name, fn in SCORERS.items():
        try:
            out[name] = float(fn(X, partition, cvnnh_k))
        except (ValueError, ArithmeticError):
            out[name] = float("nan")
    return out
