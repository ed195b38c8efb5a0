"""Slow, direct reference implementations used as test oracles.

Each one follows the textbook definition as literally as possible and shares
no code with the package.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np


def ari_pairs(a, b):
    """ARI by enumerating every unordered point pair."""
    a, b = list(a), list(b)
    n = len(a)
    if n < 2:
        return 1.0
    both = same_a = same_b = 0
    for i, j in itertools.combinations(range(n), 2):
        sa, sb = a[i] == a[j], b[i] == b[j]
        same_a += sa
        same_b += sb
        both += sa and sb
    total = n * (n - 1) // 2
    expected = same_a * same_b / total
    top = 0.5 * (same_a + same_b)
    if top == expected:
        return 1.0
    return (both - expected) / (top - expected)


def nmi_direct(a, b):
    """2 I / (H_a + H_b) from explicit probability tables (natural log)."""
    n = len(a)
    pa = {k: v / n for k, v in Counter(a).items()}
    pb = {k: v / n for k, v in Counter(b).items()}
    pab = {k: v / n for k, v in Counter(zip(a, b)).items()}
    ha = -sum(p * math.log(p) for p in pa.values())
    hb = -sum(p * math.log(p) for p in pb.values())
    if ha + hb == 0:
        return 1.0
    mi = sum(p * math.log(p / (pa[x] * pb[y])) for (x, y), p in pab.items())
    return 2 * mi / (ha + hb)


def overlap_direct(a, b):
    """(1/N) sum over clusters of a of the largest shared count with any cluster of b."""
    a, b = list(a), list(b)
    total = 0
    for ca in set(a):
        members = {i for i, x in enumerate(a) if x == ca}
        total += max(sum(1 for i in members if b[i] == cb) for cb in set(b))
    return total / len(a)


def naive_dbscan_core_components(X, eps, min_samples):
    """Core flags and the connected components of core points (as frozensets)."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    n = X.shape[0]
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    adj = D <= eps
    core = adj.sum(1) >= min_samples
    seen = set()
    comps = []
    for s in range(n):
        if not core[s] or s in seen:
            continue
        comp, stack = set(), [s]
        while stack:
            p = stack.pop()
            if p in comp:
                continue
            comp.add(p)
            stack.extend(q for q in range(n) if core[q] and adj[p, q] and q not in comp)
        seen |= comp
        comps.append(frozenset(comp))
    return core, set(comps), adj


def naive_dbscan(X, eps, min_samples, order=None):
    """Textbook DBSCAN with explicit visiting order; border points go to the first cluster reaching them."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    n = X.shape[0]
    order = list(range(n)) if order is None else list(order)
    rank = {p: r for r, p in enumerate(order)}
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    nbrs = [sorted(np.flatnonzero(D[i] <= eps), key=lambda q: rank[q]) for i in range(n)]
    core = [len(nb) >= min_samples for nb in nbrs]
    labels = [None] * n
    c = 0
    for p in order:
        if labels[p] is not None or not core[p]:
            continue
        labels[p] = c
        fifo = [p]
        while fifo:
            q = fifo.pop(0)
            for r in nbrs[q]:
                if labels[r] is None:
                    labels[r] = c
                    if core[r]:
                        fifo.append(r)
        c += 1
    return [-1 if lab is None else lab for lab in labels]


def canonical(labels):
    """Relabel by first occurrence, keeping -1."""
    mapping, out = {}, []
    for lab in labels:
        if lab == -1:
            out.append(-1)
            continue
        mapping.setdefault(lab, len(mapping))
        out.append(mapping[lab])
    return out


def naive_ward_heights(X):
    """Merge heights by brute force: at every step merge the pair with least Ward increase.

    The increase is computed from centroids and sizes directly, not from any
    distance-update recurrence.
    """
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    clusters = [[i] for i in range(len(X))]
    heights = []
    while len(clusters) > 1:
        best = None
        for i, j in itertools.combinations(range(len(clusters)), 2):
            A, B = X[clusters[i]], X[clusters[j]]
            na, nb = len(A), len(B)
            d = na * nb / (na + nb) * float(((A.mean(0) - B.mean(0)) ** 2).sum())
            if best is None or d < best[0]:
                best = (d, i, j)
        d, i, j = best
        heights.append(d)
        clusters[i] = clusters[i] + clusters[j]
        del clusters[j]
    return np.array(heights)


def naive_lance_williams_heights(X):
    """Greedy global-minimum Ward merging on a full dissimilarity matrix.

    Starts from half squared distances and applies the Lance-Williams update
    after each merge; O(n^3) but vectorised per step.
    """
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    n = len(X)
    D = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1) / 2
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    alive = np.ones(n, dtype=bool)
    heights = []
    for _ in range(n - 1):
        i, j = np.unravel_index(np.argmin(D), D.shape)
        d = D[i, j]
        heights.append(d)
        ni, nj, nk = size[i], size[j], size
        new = ((ni + nk) * D[i] + (nj + nk) * D[j] - nk * d) / (ni + nj + nk)
        new[~alive] = np.inf
        new[[i, j]] = np.inf
        D[i], D[:, i] = new, new
        D[j], D[:, j] = np.inf, np.inf
        size[i] += nj
        alive[j] = False
    return np.array(heights)


def naive_silhouette(X, labels):
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    labels = list(labels)
    n = len(labels)
    s = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            s.append(0.0)
            continue
        a = np.mean([np.linalg.norm(X[i] - X[j]) for j in own])
        b = min(np.mean([np.linalg.norm(X[i] - X[j]) for j in range(n) if labels[j] == c])
                for c in set(labels) if c != labels[i])
        s.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return float(np.mean(s))


def naive_kdbcv(X, labels):
    """Density-based validity transcribed loop by loop (Prim's MST, explicit core distances)."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    labels = np.asarray(labels)
    n, f = X.shape
    ids = sorted(set(labels.tolist()))

    def dist(i, j):
        return float(np.sqrt(((X[i] - X[j]) ** 2).sum()))

    positive = [dist(i, j) for i in range(n) for j in range(i + 1, n) if dist(i, j) > 0]
    floor = min(positive) * 1e-6
    core = {}
    for c in ids:
        mem = [i for i in range(n) if labels[i] == c]
        for i in mem:
            acc = 0.0
            for j in mem:
                if j != i:
                    acc += (1.0 / max(dist(i, j), floor)) ** f
            core[i] = (acc / (len(mem) - 1)) ** (-1.0 / f)

    def mrd(i, j):
        return max(dist(i, j), core[i], core[j])

    spars, sep = {}, {}
    for c in ids:
        mem = [i for i in range(n) if labels[i] == c]
        in_tree, edges = {mem[0]}, []
        while len(in_tree) < len(mem):
            w, v = min((mrd(u, v), v) for u in in_tree for v in mem if v not in in_tree)
            edges.append(w)
            in_tree.add(v)
        spars[c] = max(edges) if edges else 0.0
        sep[c] = min(mrd(i, j) for i in mem for j in range(n) if labels[j] != c)
    total = 0.0
    for c in ids:
        m = max(sep[c], spars[c])
        v = (sep[c] - spars[c]) / m if m > 0 else 0.0
        total += (labels == c).sum() * v
    return total / n


def exact_mwu_p(a, b):
    """Two-sided exact p-value by enumerating every relabelling of the pooled sample."""
    pooled = list(a) + list(b)
    N, na = len(pooled), len(a)
    order = sorted(range(N), key=lambda i: pooled[i])
    ranks = [0.0] * N
    i = 0
    while i < N:
        j = i
        while j + 1 < N and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2 + 1
        i = j + 1
    mu = na * (N - na) / 2

    def u_of(idx):
        return sum(ranks[k] for k in idx) - na * (na + 1) / 2

    obs = abs(u_of(range(na)) - mu)
    hits = total = 0
    for idx in itertools.combinations(range(N), na):
        total += 1
        hits += abs(u_of(idx) - mu) >= obs - 1e-9
    return u_of(range(na)), hits / total
