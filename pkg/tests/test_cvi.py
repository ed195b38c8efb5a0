import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn import metrics

from nemiregions.clustering import NOISE
from nemiregions.cvi import (all_scores, calinski_harabasz, cdr, cvnnh, davies_bouldin, kdbcv,
                             silhouette, silhouette_samples)
from nemiregions.errors import DegenerateError

from oracles import naive_kdbcv, naive_silhouette

X4 = np.array([0.0, 1.0, 10.0, 11.0])
P4 = [0, 0, 1, 1]


def test_hand_values():
    # trW = 4 * 0.25 = 1, trB = 2 * 2 * 25 = 100, (n-k)/(k-1) = 2
    assert calinski_harabasz(X4, P4) == pytest.approx(200.0, abs=1e-12)
    # s = 0.5 per cluster, centroid distance 10
    assert davies_bouldin(X4, P4) == pytest.approx(0.1, abs=1e-12)
    # s = (9.5/10.5 + 8.5/9.5) / 2 for each cluster
    assert silhouette(X4, P4) == pytest.approx((9.5 / 10.5 + 8.5 / 9.5) / 2, abs=1e-12)
    assert silhouette(X4, P4) == pytest.approx(0.89975, abs=1e-6)
    # local densities 1, 1, 2 -> avg 4/3, unif = (1/3 + 1/3 + 2/3) / (4/3) = 1
    assert cdr(np.array([0.0, 1.0, 3.0]), [0, 0, 0]) == pytest.approx(1.0, abs=1e-12)
    # K=1 neighbours are in-cluster: sep 0; mean intra distance 1
    assert cvnnh(X4, P4, K=1) == pytest.approx(1.0, abs=1e-12)
    assert kdbcv(X4, [NOISE] * 4) == -1.0


def test_degenerate_and_invalid_inputs():
    with pytest.raises(DegenerateError):
        calinski_harabasz(np.array([0.0, 0.0, 5.0, 5.0]), P4)
    assert davies_bouldin(np.array([0.0, 0.0, 5.0, 5.0]), P4) == 0.0
    with pytest.raises(DegenerateError):
        davies_bouldin(np.array([-1.0, 1.0, -2.0, 2.0]), P4)
    with pytest.raises(ValueError):
        davies_bouldin(X4, [0, 0, 0, 0])
    with pytest.raises(ValueError):
        silhouette(X4, [0, 1, 2, 3])  # k = n
    with pytest.raises(ValueError):
        kdbcv(X4, [0, 0, 0, 0])
    scores = all_scores(np.array([0.0, 0.0, 5.0, 5.0]), P4, cvnnh_k=1)
    assert np.isnan(scores["ch"]) and scores["db"] == 0.0


def test_cdr_trivial_cases():
    assert cdr(np.arange(6.0), [0] * 6) == pytest.approx(0.0)
    assert cdr(np.array([0.0, 5.0, 9.0]), [0, 1, 2]) == 0.0


def test_cvnnh_bounds():
    # singletons only: compactness 0 and every neighbour is foreign
    assert cvnnh(X4, [0, 1, 2, 3], K=1) == pytest.approx(1.0)
    # K=3 on two pairs: each point has 1 own and 2 foreign neighbours
    sep_plus_comp = cvnnh(X4, P4, K=3)
    assert sep_plus_comp == pytest.approx(2 / 3 + 1.0)


def _instance(seed, n_max=60, with_noise=True):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, n_max))
    k = int(rng.integers(2, 5))
    X = rng.normal(size=(n, int(rng.integers(1, 4))))
    labels = np.concatenate([np.arange(k).repeat(2), rng.integers(0, k, n - 2 * k)])
    rng.shuffle(labels)
    if with_noise:
        labels[rng.random(n) < 0.15] = NOISE
    return X, labels


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_against_sklearn_and_brute_force(seed):
    X, labels = _instance(seed, with_noise=False)
    assert calinski_harabasz(X, labels) == pytest.approx(metrics.calinski_harabasz_score(X, labels), rel=1e-9)
    assert davies_bouldin(X, labels) == pytest.approx(metrics.davies_bouldin_score(X, labels), rel=1e-9)
    assert silhouette(X, labels) == pytest.approx(metrics.silhouette_score(X, labels), abs=1e-9)
    assert silhouette(X, labels) == pytest.approx(naive_silhouette(X, labels), abs=1e-9)
    assert np.allclose(silhouette_samples(X, labels), metrics.silhouette_samples(X, labels), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_kdbcv_matches_transcription_and_bounds(seed):
    X, labels = _instance(seed, n_max=40, with_noise=False)
    v = kdbcv(X, labels)
    assert -1.0 <= v <= 1.0
    assert v == pytest.approx(naive_kdbcv(X, labels), abs=1e-9)


def test_kdbcv_prefers_true_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 0.1, (30, 2)), rng.normal(3, 0.1, (30, 2))])
    truth = np.repeat([0, 1], 30)
    random_split = rng.permutation(truth)
    assert kdbcv(X, truth) > 0
    assert kdbcv(X, truth) >= kdbcv(X, random_split)
    assert calinski_harabasz(X, truth) > calinski_harabasz(X, random_split)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_noise_exclusion_equals_prefiltering(seed):
    X, labels = _instance(seed)
    keep = labels != NOISE
    if len(np.unique(labels[keep])) < 2:
        return
    full = all_scores(X, labels)
    filtered = all_scores(X[keep], labels[keep])
    for name in full:
        assert full[name] == pytest.approx(filtered[name], nan_ok=True, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_permutation_relabel_and_scale_invariance(seed):
    X, labels = _instance(seed, with_noise=False)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(X))
    relabel = np.array([7, 3, 9, 1, 5])[labels]
    base = all_scores(X, labels)
    moved = all_scores(X[perm], relabel[perm])
    for name in base:
        assert moved[name] == pytest.approx(base[name], nan_ok=True, rel=1e-9, abs=1e-12)
    scaled = all_scores(10 * X, labels)
    for name in ("ch", "db", "sh", "cdr", "kdbcv"):
        assert scaled[name] == pytest.approx(base[name], nan_ok=True, rel=1e-9, abs=1e-12)
