"""Ensemble fusion of clustering runs with per-point assignment uncertainty.

Each member is relabelled by cluster size, matched label-by-label to a base
member through volume-weighted overlap (intersection over union), and the
fused label of a point is the most frequent matched label. Uncertainty is the
percentage of members that disagree with the fused label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .clustering import NOISE, ClusterSet, as_labels


@dataclass(frozen=True)
class Ensemble:
    members: tuple[ClusterSet, ...]
    weights: Optional[np.ndarray] = None
    base_id: int = 0

    def __post_init__(self):
        members = tuple(m if isinstance(m, ClusterSet) else ClusterSet(m) for m in self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ValueError("ensemble is empty")
        n = len(members[0])
        if any(len(m) != n for m in members):
            raise ValueError("ensemble members differ in length")
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (n,):
            raise ValueError("weights must have one entry per point")
        if not (w > 0).all():
            raise ValueError("weights must be positive")
        object.__setattr__(self, "weights", w)
        if not 0 <= self.base_id < len(members):
            raise ValueError(f"base_id {self.base_id} out of range")

    def __len__(self):
        return len(self.members)

    @property
    def n_points(self) -> int:
        return len(self.members[0])


@dataclass(frozen=True)
class NemiResult:
    final_labels: ClusterSet
    uncertainty: np.ndarray  # percent, one per point
    matched: tuple[ClusterSet, ...] = field(repr=False)
    base_id: int = 0

    @property
    def mean_uncertainty(self) -> float:
        return float(self.uncertainty.mean())


def sort_labels_by_size(partition) -> ClusterSet:
    """Relabel so that 0 is the largest cluster; equal sizes keep old-id order."""
    labels = as_labels(partition)
    ids, counts = np.unique(labels[labels != NOISE], return_counts=True)
    order = np.lexsort((ids, -counts))
    mapping = np.empty(ids.size, dtype=np.int64)
    mapping[order] = np.arange(ids.size)
    out = np.full_like(labels, NOISE)
    keep = labels != NOISE
    out[keep] = mapping[np.searchsorted(ids, labels[keep])]
    prov = partition.provenance if isinstance(partition, ClusterSet) else {}
    return ClusterSet(out, prov)


def nemi_overlap(a_points, b_points, weights=None) -> float:
    """Weight of the intersection over weight of the union of two point sets."""
    a = {int(i) for i in a_points}
    b = {int(i) for i in b_points}
    if not a and not b:
        raise ValueError("both point sets are empty")
    if weights is None:
        return len(a & b) / len(a | b)
    w = np.asarray(weights, dtype=float)
    # union built on top of the intersection so equal sets give exactly 1
    inter = w[sorted(a & b)].sum()
    union = inter + w[sorted(a ^ b)].sum()
    return float(inter / union)


def overlap_matrix(base, member, weights) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted IoU for every (base cluster, member cluster) pair, NOISE excluded."""
    bl, ml = as_labels(base), as_labels(member)
    w = np.asarray(weights, dtype=float)
    b_ids = np.unique(bl[bl != NOISE])
    m_ids = np.unique(ml[ml != NOISE])
    both = (bl != NOISE) & (ml != NOISE)
    bi = np.searchsorted(b_ids, bl[both])
    mi = np.searchsorted(m_ids, ml[both])
    inter = np.zeros((b_ids.size, m_ids.size))
    np.add.at(inter, (bi, mi), w[both])
    wb = np.array([w[bl == c].sum() for c in b_ids])
    wm = np.array([w[ml == c].sum() for c in m_ids])
    union = wb[:, None] + wm[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        ov = np.where(union > 0, inter / union, 0.0)
    return ov, b_ids, m_ids


def match_to_base(base, member, weights=None) -> ClusterSet:
    """Relabel ``member`` into the base label space by greedy one-to-one overlap matching.

    Pairs are taken in descending overlap (ties: lower base label, then lower
    member label). Member clusters left without a positive-overlap partner get
    fresh ids above the base's largest label, in member label order.
    """
    bl, ml = as_labels(base), as_labels(member)
    if bl.shape != ml.shape:
        raise ValueError("base and member differ in length")
    w = np.ones(bl.size) if weights is None else np.asarray(weights, dtype=float)
    ov, b_ids, m_ids = overlap_matrix(bl, ml, w)
    mapping = {}
    if ov.size:
        bi, mi = np.nonzero(ov > 0)
        vals = ov[bi, mi]
        order = np.lexsort((m_ids[mi], b_ids[bi], -vals))
        used_base = set()
        for t in order:
            b, m = int(b_ids[bi[t]]), int(m_ids[mi[t]])
            if b in used_base or m in mapping:
                continue
            mapping[m] = b
            used_base.add(b)
    fresh = int(b_ids.max()) + 1 if b_ids.size else 0
    for m in m_ids:
        if int(m) not in mapping:
            mapping[int(m)] = fresh
            fresh += 1
    out = np.full_like(ml, NOISE)
    for m, b in mapping.items():
        out[ml == m] = b
    prov = dict(member.provenance) if isinstance(member, ClusterSet) else {}
    prov["matched_to_base"] = mapping
    return ClusterSet(out, prov)


def _fuse(base: np.ndarray, votes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per point: modal base-space label (ties to the base's own) and percent disagreement."""
    n_members, n = votes.shape
    n_base = int(base.max()) + 1 if (base != NOISE).any() else 0
    final = np.full(n, NOISE, dtype=np.int64)
    valid = base != NOISE
    if n_base:
        counts = np.zeros((n, n_base), dtype=np.int64)
        cols = np.arange(n)
        for v in votes:
            ok = (v != NOISE) & (v < n_base)
            np.add.at(counts, (cols[ok], v[ok]), 1)
        best = counts.max(axis=1)
        own = np.where(valid, counts[cols, np.where(valid, base, 0)], -1)
        modal = np.argmax(counts, axis=1)
        final = np.where(own == best, base, modal)
        final[~valid] = NOISE
    agree = (votes == final[None, :]).sum(axis=0)
    uncertainty = 100.0 * (1.0 - agree / n_members)
    return final, uncertainty


def aggregate(ensemble: Ensemble, base_id: Optional[int] = None) -> NemiResult:
    """Fuse all members against the base member."""
    if len(ensemble) < 2:
        raise ValueError("aggregation needs at least two members")
    base_id = ensemble.base_id if base_id is None else base_id
    if not 0 <= base_id < len(ensemble):
        raise ValueError(f"base_id {base_id} outside 0..{len(ensemble) - 1}")
    w = ensemble.weights
    sorted_members = [sort_labels_by_size(m) for m in ensemble.members]
    base = sorted_members[base_id]
    matched = []
    for i, m in enumerate(sorted_members):
        matched.append(base if i == base_id else match_to_base(base, m, w))
    votes = np.vstack([m.labels for m in matched])
    final, uncertainty = _fuse(base.labels, votes)
    prov = {"algorithm": "nemi", "base_id": base_id, "n_members": len(ensemble)}
    return NemiResult(ClusterSet(final, prov), uncertainty, tuple(matched), base_id)


def mean_uncertainty_by_base(ensemble: Ensemble, candidates: Optional[Sequence[int]] = None) -> dict[int, float]:
    candidates = range(len(ensemble)) if candidates is None else candidates
    return {int(c): aggregate(ensemble, int(c)).mean_uncertainty for c in candidates}


def select_base(ensemble: Ensemble, candidates: Optional[Sequence[int]] = None) -> int:
    """Candidate base giving the lowest mean uncertainty (ties to the lower index)."""
    if len(ensemble) < 2:
        raise ValueError("base selection needs at least two members")
    scores = mean_uncertainty_by_base(ensemble, candidates)
    best = min(scores.values())
    return min(c for c, s in scores.items() if s == best)
