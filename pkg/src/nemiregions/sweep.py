"""Hyperparameter sweeps, elbow selection and repeated-run ensembles."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .clustering import ClusterSet, dbscan, kmeans, region_query, ward_linkage
from .cvi import CVI_NAMES, all_scores
from .embedding import EmbeddingParams, embed
from .nemi import Ensemble
from .similarity import ari, nmi, overlap_sym


@dataclass(frozen=True)
class ScoreCurve:
    algorithm: str
    k_values: np.ndarray
    mean: dict
    std: dict
    n_clusters: np.ndarray
    noise_fraction: np.ndarray
    repeats: int

    def to_rows(self):
        for i, k in enumerate(self.k_values):
            for name in CVI_NAMES:
                yield {"algorithm": self.algorithm, "k": int(k), "metric": name,
                       "mean": self.mean[name][i], "std": self.std[name][i]}
            yield {"algorithm": self.algorithm, "k": int(k), "metric": "n_clusters",
                   "mean": float(self.n_clusters[i]), "std": 0.0}


@dataclass(frozen=True)
class Heatmap:
    epsilon: np.ndarray
    min_samples: np.ndarray
    scores: dict  # metric -> (n_eps, n_ms) array, NaN where undefined
    n_clusters: np.ndarray
    noise_fraction: np.ndarray

    def best(self, metric: str, maximize: bool = True) -> tuple[float, int]:
        """Grid cell optimising a CVI, ignoring undefined cells."""
        grid = self.scores[metric]
        if np.isnan(grid).all():
            raise ValueError(f"{metric} is undefined on every cell")
        flat = np.nanargmax(grid) if maximize else np.nanargmin(grid)
        i, j = np.unravel_index(flat, grid.shape)
        return float(self.epsilon[i]), int(self.min_samples[j])

    def selections(self) -> dict:
        """CH-optimal and cluster-count-elbow cells; the final choice is left to the user."""
        out = {}
        if "ch" in self.scores and not np.isnan(self.scores["ch"]).all():
            out["ch_optimal"] = self.best("ch")
        try:
            out["elbow"] = elbow_2d(self.n_clusters, self.epsilon, self.min_samples)
        except ValueError:
            pass
        return out

    def to_rows(self):
        for i, eps in enumerate(self.epsilon):
            for j, ms in enumerate(self.min_samples):
                base = {"epsilon": float(eps), "min_samples": int(ms)}
                for name, grid in self.scores.items():
                    yield {**base, "metric": name, "value": float(grid[i, j])}
                yield {**base, "metric": "n_clusters", "value": float(self.n_clusters[i, j])}
                yield {**base, "metric": "noise_fraction", "value": float(self.noise_fraction[i, j])}


def rows_to_csv(rows) -> str:
    rows = list(rows)
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def score_curve(X, algorithm: str, k_range: Sequence[int], repeats: int = 10,
                seeds: Optional[Sequence[int]] = None, cvnnh_k: int = 10) -> ScoreCurve:
    """All six CVIs for k-Means or Ward over ``k_range``, mean and std over repeats."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    ks = np.asarray(list(k_range), dtype=int)
    if ks.size == 0 or ks.min() < 2 or ks.max() > n - 1:
        raise ValueError(f"k values must lie in [2, {n - 1}]")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    seeds = list(range(repeats)) if seeds is None else list(seeds)
    if len(seeds) != repeats:
        raise ValueError("need one seed per repeat")
    tree = ward_linkage(X) if algorithm == "ward" else None
    vals = {name: np.full((ks.size, repeats), np.nan) for name in CVI_NAMES}
    n_cl = np.zeros(ks.size)
    for i, k in enumerate(ks):
        for r, seed in enumerate(seeds):
            if algorithm == "kmeans":
                cs, _ = kmeans(X, int(k), seed=seed)
            elif algorithm == "ward":
                cs = tree.cut(int(k))
            else:
                raise ValueError(f"unknown algorithm {algorithm!r}")
            scores = all_scores(X, cs, cvnnh_k)
            for name in CVI_NAMES:
                vals[name][i, r] = scores[name]
            n_cl[i] = cs.n_clusters
    mean, std = {}, {}
    for name in CVI_NAMES:
        v = vals[name]
        ok = ~np.isnan(v)
        cnt = ok.sum(axis=1)
        with np.errstate(invalid="ignore"):
            m = np.where(cnt > 0, np.nansum(v, axis=1) / np.maximum(cnt, 1), np.nan)
            s = np.array([np.std(row[~np.isnan(row)]) if (~np.isnan(row)).any() else np.nan
                          for row in v])
        mean[name], std[name] = m, s
    return ScoreCurve(algorithm, ks, mean, std, n_cl, np.zeros(ks.size), repeats)


def epsilon_axis(eps_min: float, eps_max: float, steps: int) -> np.ndarray:
    if steps < 2:
        raise ValueError("need at least two epsilon steps")
    return np.linspace(eps_min, eps_max, steps)


def dbscan_grid(X, epsilon_range=(0.01, 0.2, 20), min_samples_range=(2, 11),
                point_order_seed: Optional[int] = None, metrics: Sequence[str] = CVI_NAMES,
                cvnnh_k: int = 10) -> Heatmap:
    """DBSCAN over a linear epsilon grid and an inclusive min_samples range.

    Every cell records the requested CVIs (NaN if undefined), the cluster count
    and the noise fraction.
    """
    X = np.asarray(X, dtype=float)
    eps_axis = epsilon_axis(*epsilon_range)
    lo, hi = min_samples_range
    ms_axis = np.arange(int(lo), int(hi) + 1)
    if ms_axis.size < 1:
        raise ValueError("empty min_samples range")
    n = X.shape[0]
    order = None
    if point_order_seed is not None:
        order = np.random.default_rng(point_order_seed).permutation(n)
    scores = {m: np.full((eps_axis.size, ms_axis.size), np.nan) for m in metrics}
    n_cl = np.zeros((eps_axis.size, ms_axis.size), dtype=int)
    noise = np.zeros((eps_axis.size, ms_axis.size))
    for i, eps in enumerate(eps_axis):
        nb = region_query(X, eps)
        for j, ms in enumerate(ms_axis):
            cs = dbscan(X, float(eps), int(ms), order, neighbors=nb)
            n_cl[i, j] = cs.n_clusters
            noise[i, j] = cs.noise_fraction
            if metrics:
                sc = all_scores(X, cs, cvnnh_k)
                for m in metrics:
                    scores[m][i, j] = sc[m]
    return Heatmap(eps_axis, ms_axis, scores, n_cl, noise)


def _normalise(v):
    v = np.asarray(v, dtype=float)
    span = v.max() - v.min()
    if span == 0:
        raise ValueError("constant curve has no elbow")
    return (v - v.min()) / span


def elbow_1d(curve, k_values: Optional[Sequence] = None, concave: bool = False):
    """Point of largest discrete second difference of the curve scaled to [0, 1].

    Suited to decreasing convex curves (cost against k); pass ``concave=True``
    for increasing saturating curves. Ties go to the smaller k.
    """
    y = np.asarray(curve, dtype=float)
    if y.size < 3:
        raise ValueError("need at least three points")
    y = _normalise(y)
    second = y[:-2] - 2.0 * y[1:-1] + y[2:]
    if concave:
        second = -second
    best = second.max()
    if best <= 1e-12:
        raise ValueError("curve has no positive curvature")
    idx = int(np.flatnonzero(second >= best - 1e-12)[0]) + 1
    return idx if k_values is None else k_values[idx]


def elbow_2d(n_clusters, epsilon: Optional[Sequence] = None,
             min_samples: Optional[Sequence] = None):
    """Cell of steepest cluster-count gradient on a heatmap indexed [epsilon, min_samples].

    Values and both axes are scaled to [0, 1]; gradients are forward
    differences (backward on the last row/column). Ties go to the smaller
    epsilon, then the smaller min_samples.
    """
    H = np.asarray(n_clusters, dtype=float)
    if H.ndim != 2 or min(H.shape) < 2:
        raise ValueError("need at least a 2x2 grid")
    H = _normalise(H)
    ne, nm = H.shape
    gx = np.empty_like(H)
    gy = np.empty_like(H)
    gx[:-1] = (H[1:] - H[:-1]) * (ne - 1)
    gx[-1] = gx[-2]
    gy[:, :-1] = (H[:, 1:] - H[:, :-1]) * (nm - 1)
    gy[:, -1] = gy[:, -2]
    mag = np.hypot(gx, gy)
    best = mag.max()
    flat = int(np.flatnonzero(mag.ravel() >= best - 1e-12)[0])
    i, j = divmod(flat, nm)
    if epsilon is None or min_samples is None:
        return i, j
    return float(epsilon[i]), int(min_samples[j])


@dataclass(frozen=True)
class DbscanParams:
    epsilon: float = 0.10661017
    min_samples: int = 4
    shuffle: bool = False


@dataclass(frozen=True)
class VariabilityReport:
    ari: tuple[float, float]
    nmi: tuple[float, float]
    overlap: tuple[float, float]
    n_pairs: int
    pairwise: np.ndarray = field(repr=False)  # rows of (i, j, ari, nmi, overlap)


def pairwise_variability(members: Sequence[ClusterSet]) -> VariabilityReport:
    rows = []
    for i, j in itertools.combinations(range(len(members)), 2):
        a, b = members[i], members[j]
        rows.append((i, j, ari(a, b), nmi(a, b), overlap_sym(a, b)))
    arr = np.array(rows, dtype=float).reshape(-1, 5)

    def ms(col):
        return (float(arr[:, col].mean()), float(arr[:, col].std())) if arr.size else (np.nan, np.nan)

    return VariabilityReport(ms(2), ms(3), ms(4), arr.shape[0], arr)


def ensemble_run(X, embed_params: Optional[EmbeddingParams], dbscan_params: DbscanParams,
                 n_runs: int, base_seed: int = 0, weights=None,
                 embedder: Optional[Callable] = None, progress: Optional[Callable] = None):
    """Embed-then-DBSCAN ``n_runs`` times; run i embeds with seed ``base_seed + i``.

    With ``embed_params=None`` the features are clustered directly. When
    ``dbscan_params.shuffle`` is set, run i visits points in an order drawn
    from seed ``base_seed + i + 1_000_000``. Returns the ensemble, the
    pairwise variability report and the embeddings.
    """
    if n_runs < 2:
        raise ValueError("need at least two runs")
    X = np.asarray(X, dtype=float)
    embedder = embedder or embed
    members, embeddings = [], []
    for i in range(n_runs):
        seed = base_seed + i
        if embed_params is None:
            coords = X
        else:
            coords = embedder(X, replace(embed_params, seed=seed)).coords
        order = None
        if dbscan_params.shuffle:
            order = np.random.default_rng(seed + 1_000_000).permutation(X.shape[0])
        cs = dbscan(coords, dbscan_params.epsilon, dbscan_params.min_samples, order)
        cs = ClusterSet(cs.labels, {"algorithm": "dbscan", "epsilon": dbscan_params.epsilon,
                                    "min_samples": dbscan_params.min_samples, "seed": seed})
        members.append(cs)
        embeddings.append(coords)
        if progress:
            progress(i)
    ens = Ensemble(tuple(members), weights)
    return ens, pairwise_variability(members), embeddings
