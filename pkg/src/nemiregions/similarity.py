"""Comparison of two partitions of the same points, plus a rank-sum test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb
from scipy.stats import norm

from .clustering import NOISE, as_labels


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # rows: clusters of A, columns: clusters of B
    row_labels: np.ndarray
    col_labels: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def _pair(A, B, drop_noise=False):
    a, b = as_labels(A), as_labels(B)
    if a.shape != b.shape:
        raise ValueError(f"partitions differ in length: {a.size} vs {b.size}")
    if drop_noise:
        keep = (a != NOISE) & (b != NOISE)
        a, b = a[keep], b[keep]
    return a, b


def contingency(A, B, drop_noise: bool = False) -> ContingencyTable:
    """Counts of points per (cluster of A, cluster of B); NOISE is an ordinary label here."""
    a, b = _pair(A, B, drop_noise)
    ra, ia = np.unique(a, return_inverse=True)
    rb, ib = np.unique(b, return_inverse=True)
    counts = np.zeros((ra.size, rb.size), dtype=np.int64)
    np.add.at(counts, (ia, ib), 1)
    return ContingencyTable(counts, ra, rb)


def ari(A, B, drop_noise: bool = False) -> float:
    """Adjusted Rand index from pair counts; 1.0 when both partitions are trivial."""
    t = contingency(A, B, drop_noise)
    n = t.n
    if n < 2:
        return 1.0
    sum_ij = comb(t.counts, 2).sum()
    sum_a = comb(t.row_sums, 2).sum()
    sum_b = comb(t.col_sums, 2).sum()
    expected = sum_a * sum_b / comb(n, 2)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def nmi(A, B, drop_noise: bool = False) -> float:
    """Mutual information normalised by the arithmetic mean of the entropies (natural log)."""
    t = contingency(A, B, drop_noise)
    n = t.n
    if n == 0:
        return 1.0
    pa = t.row_sums / n
    pb = t.col_sums / n
    ha = -float((pa * np.log(pa)).sum())
    hb = -float((pb * np.log(pb)).sum())
    if ha + hb == 0:
        return 1.0
    nz = t.counts > 0
    pij = t.counts[nz] / n
    outer = np.outer(pa, pb)[nz]
    mi = float((pij * np.log(pij / outer)).sum())
    return min(1.0, max(0.0, 2.0 * mi / (ha + hb)))


def overlap_asym(A, B, drop_noise: bool = False) -> float:
    """Fraction of points covered when each cluster of A takes its best-matching cluster of B."""
    t = contingency(A, B, drop_noise)
    if t.n == 0:
        raise ValueError("no points to compare")
    return float(t.counts.max(axis=1).sum() / t.n)


def overlap_sym(A, B, drop_noise: bool = False) -> float:
    return 0.5 * (overlap_asym(A, B, drop_noise) + overlap_asym(B, A, drop_noise))


# --- Mann-Whitney U ------------------------------------------------------

def _midranks(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sv = values[order]
    i = 0
    while i < sv.size:
        j = i
        while j + 1 < sv.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_u_distribution(ranks, n_a):
    """Counts of U over all size-n_a subsets of the pooled midranks."""
    doubled = np.rint(2 * ranks).astype(int)
    max_sum = int(doubled.sum())
    ways = [dict() for _ in range(n_a + 1)]
    ways[0][0] = 1
    for r in doubled:
        for c in range(n_a, 0, -1):
            prev = ways[c - 1]
            cur = ways[c]
            for s, w in prev.items():
                cur[s + r] = cur.get(s + r, 0) + w
    offset = n_a * (n_a + 1)
    return {(s - offset) / 2.0: w for s, w in ways[n_a].items()}, max_sum


def mann_whitney_u(sample_a, sample_b, exact: bool | None = None) -> tuple[float, float]:
    """U statistic of ``sample_a`` and the two-sided p-value.

    Exact permutation p-value (ties kept as midranks) when the smaller sample
    has at most 8 values and both together at most 25; otherwise the normal
    approximation with tie and continuity corrections.
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    na, nb = a.size, b.size
    N = na + nb
    ranks = _midranks(np.concatenate([a, b]))
    u = float(ranks[:na].sum() - na * (na + 1) / 2.0)
    mu = na * nb / 2.0
    if exact is None:
        exact = min(na, nb) <= 8 and N <= 25
    if exact:
        dist, _ = _exact_u_distribution(ranks, na)
        total = sum(dist.values())
        obs = abs(u - mu)
        extreme = sum(w for val, w in dist.items() if abs(val - mu) >= obs - 1e-9)
        return u, min(1.0, extreme / total)
    _, counts = np.unique(ranks, return_counts=True)
    tie = float((counts ** 3 - counts).sum())
    var = na * nb / 12.0 * ((N + 1) - tie / (N * (N - 1))) if N > 1 else 0.0
    if var <= 0:
        return u, 1.0
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    return u, float(min(1.0, 2.0 * norm.sf(max(z, 0.0))))
