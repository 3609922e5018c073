import itertools

import numpy as np
import pytest
from scipy.cluster.hierarchy import linkage

from termminer.segment_clustering import (
    Codebook,
    UnitSequence,
    hac_ward,
    has_converged,
    kmeans,
    label_diff_rate,
    suggest_k,
    transcribe,
)
from termminer.segmentation import Segment, SegmentFeature
from termminer.synthesis import generate_features

from oracles import ward_cost


def test_first_merge_is_cheapest_pair():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 10.0]])
    d = hac_ward(X)
    costs = {(i, j): ward_cost(X, [i], [j]) for i, j in itertools.combinations(range(3), 2)}
    i, j = min(costs, key=costs.get)
    first = d.merges[0]
    assert (first.cluster_a, first.cluster_b) == (i, j) == (0, 1)


def test_identical_points_merge_at_zero():
    d = hac_ward(np.array([[2.0, 3.0], [2.0, 3.0]]))
    assert len(d.merges) == 1 and d.merges[0].height == 0.0


def test_too_few_points():
    with pytest.raises(ValueError):
        hac_ward(np.zeros((1, 3)))


@pytest.mark.parametrize("seed", range(5))
def test_ward_heights_match_scipy(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    ours = hac_ward(X).heights
    ref = linkage(X, method="ward")[:, 2]
    assert np.allclose(np.sort(ours), np.sort(ref), rtol=1e-9, atol=1e-9)
    assert np.all(np.diff(ours) >= 0)


def test_ward_merge_structure():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(30, 2))
    d = hac_ward(X)
    assert len(d.merges) == 29
    assert d.merges[-1].size == 30
    seen = set()
    for step, m in enumerate(d.merges):
        assert m.cluster_a < m.cluster_b < 30 + step
        assert m.cluster_a not in seen and m.cluster_b not in seen
        seen.update((m.cluster_a, m.cluster_b))


def test_sample_cap():
    X = np.random.default_rng(0).normal(size=(50, 2))
    d = hac_ward(X, sample_cap=20, seed=1)
    assert d.leaf_count == 20 and len(d.sample_indices) == 20


def test_suggest_k_two_blobs():
    X, _ = generate_features(2, 2, 40, 0.5, seed=0)
    ranks = suggest_k(hac_ward(X), max_k=10)
    assert ranks[0][0] == 2


def test_suggest_k_two_leaves():
    d = hac_ward(np.array([[0.0], [3.0]]))
    assert suggest_k(d) == [(2, 3.0)]


def test_kmeans_matches_best_two_partition():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [9.0, 9.0], [9.0, 10.0]])
    best = None
    for mask in itertools.product((0, 1), repeat=4):
        if len(set(mask)) < 2:
            continue
        lab = np.array(mask)
        cost = sum(((X[lab == c] - X[lab == c].mean(axis=0)) ** 2).sum() for c in (0, 1))
        if best is None or cost < best[0]:
            best = (cost, lab)
    res = kmeans(X, k=2, seed=0)
    assert res.inertia == pytest.approx(best[0])
    groups = {frozenset(np.flatnonzero(res.assignments == c)) for c in (0, 1)}
    assert groups == {frozenset({0, 1}), frozenset({2, 3})}


def test_kmeans_k_equals_points():
    X = np.array([[0.0], [1.0], [5.0]])
    res = kmeans(X, k=3)
    assert res.inertia == 0.0
    assert len(set(res.assignments.tolist())) == 3


def test_kmeans_errors():
    with pytest.raises(ValueError):
        kmeans(np.array([[0.0], [0.0], [1.0]]), k=3)
    with pytest.raises(ValueError):
        kmeans(np.zeros((4, 2)), k=1)


@pytest.mark.parametrize("seed", range(4))
def test_kmeans_invariants(seed):
    X, _ = generate_features(6, 3, 30, 3.0, seed=seed)
    res = kmeans(X, k=6, seed=seed)
    C = res.codebook.centroids
    d2 = ((X[:, None, :] - C[None]) ** 2).sum(axis=2)
    assert np.array_equal(res.assignments, np.argmin(d2, axis=1))
    assert all(b <= a + 1e-9 for a, b in zip(res.inertia_history, res.inertia_history[1:]))


def test_kmeans_deterministic():
    X, _ = generate_features(4, 2, 25, 1.0, seed=2)
    a, b = kmeans(X, k=4, seed=5), kmeans(X, k=4, seed=5)
    assert np.array_equal(a.codebook.centroids, b.codebook.centroids)
    assert np.array_equal(a.assignments, b.assignments)


def test_codebook_rules():
    with pytest.raises(ValueError):
        Codebook(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        Codebook(np.array([[1.0, 1.0], [1.0, 1.0]]))
    cb = Codebook(np.array([[0.0], [2.0]]))
    # equidistant point goes to the lower index
    assert cb.nearest(np.array([[1.0]])).tolist() == [0]
    assert Codebook.from_dict(cb.to_dict()).centroids.tolist() == cb.centroids.tolist()


def test_transcribe():
    cb = Codebook(np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]))
    segs = [
        SegmentFeature("u", Segment(0, 2), np.array([9.0, 1.0])),
        SegmentFeature("u", Segment(2, 5), np.array([0.5, 9.0])),
        SegmentFeature("u", Segment(5, 6), np.array([0.1, 0.1])),
    ]
    seq = transcribe(cb, segs)
    assert seq.units == (1, 2, 0)
    assert seq.frame_labels() == [1, 1, 2, 2, 2, 0]
    assert transcribe(cb, segs) == seq


def test_unit_sequence_round_trip():
    seq = UnitSequence("u", (3, 4), (Segment(0, 2), Segment(2, 3)))
    assert UnitSequence.from_dict(seq.to_dict()) == seq
    with pytest.raises(ValueError):
        UnitSequence("u", (3, 4), (Segment(0, 2),))


def test_label_diff_rate():
    assert label_diff_rate([1, 1, 1, 1], [1, 1, 1, 2]) == 0.25
    a, b = [1, 2, 3], [1, 3, 3]
    assert label_diff_rate(a, a) == 0.0
    assert label_diff_rate(a, b) == label_diff_rate(b, a)
    assert has_converged([0] * 2000, [0] * 1999 + [1])
    assert not has_converged([0] * 1000, [0] * 999 + [1])
