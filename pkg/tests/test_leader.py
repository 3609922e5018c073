import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from termminer.alignment import BagEntry, SubsequenceBag
from termminer.leader import (
    ClusteringResult,
    RoundTrace,
    canonical_order,
    cluster_report,
    leader_cluster,
)
from termminer.string_metrics import MiningConfig, normalized_levenshtein

from leader_props import check_round_invariants


def _bag(seqs):
    return SubsequenceBag(
        BagEntry(tuple(s), f"u{i:03d}", (0, len(s)), f"v{i:03d}", (0, len(s)), float(len(s)))
        for i, s in enumerate(seqs)
    )


bags = st.lists(st.lists(st.integers(0, 3), min_size=4, max_size=9), min_size=1, max_size=25)


def test_copies_of_one_sequence():
    res = leader_cluster(_bag([[1, 2, 3, 4, 5]] * 6))
    assert len(res.clusters) == 1
    assert res.clusters[0].centroid == (1, 2, 3, 4, 5)
    assert res.clusters[0].size == 6 and not res.unassigned


def test_two_disjoint_groups():
    seqs = [[1, 2, 3, 4, 1, 2]] * 4 + [[7, 8, 9, 7, 8, 9]] * 3
    res = leader_cluster(_bag(seqs))
    assert sorted(c.centroid for c in res.clusters) == [(1, 2, 3, 4, 1, 2), (7, 8, 9, 7, 8, 9)]
    assert all(c.total_intra_distance == 0 for c in res.clusters)


def test_empty_bag():
    with pytest.raises(ValueError):
        leader_cluster(SubsequenceBag())


def test_canonical_order_longest_first():
    bag = _bag([[1, 2, 3, 4], [0, 0, 0, 0, 0], [0, 1, 2, 3]])
    assert [e.units for e in canonical_order(bag)] == [(0, 0, 0, 0, 0), (0, 1, 2, 3), (1, 2, 3, 4)]


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(bags)
def test_round_invariants(seqs):
    cfg = MiningConfig()
    bag = _bag(seqs)
    trace: list[RoundTrace] = []
    res = leader_cluster(bag, cfg, trace=trace)
    check_round_invariants(list(bag), trace, cfg)
    assert res.rounds_run == len(trace)


@settings(max_examples=100, deadline=None)
@given(bags)
def test_partition_and_radius(seqs):
    bag = _bag(seqs)
    res = leader_cluster(bag)
    placed = [m for c in res.clusters for m in c.members] + res.unassigned
    assert sorted(placed) == sorted(bag.entries)
    for c in res.clusters:
        assert c.centroid in {m.units for m in c.members}
        assert all(normalized_levenshtein(c.centroid, m.units) < 1.4 for m in c.members)


def test_determinism_and_round_trip():
    seqs = [[1, 2, 3, 4], [1, 2, 3, 5], [3, 3, 3, 3, 3], [0, 1, 0, 1, 0, 1], [1, 2, 3, 4]]
    a, b = leader_cluster(_bag(seqs)), leader_cluster(_bag(list(reversed(seqs))))
    assert [c.centroid for c in a.clusters] == [c.centroid for c in b.clusters]
    assert ClusteringResult.from_dict(a.to_dict()).to_dict() == a.to_dict()


def test_max_rounds_cap():
    res = leader_cluster(_bag([[1, 2, 3, 4], [2, 2, 3, 4]]), max_rounds=1)
    assert res.rounds_run == 1
    with pytest.raises(ValueError):
        leader_cluster(_bag([[1, 2, 3, 4]]), max_rounds=0)


def test_report():
    seqs = [[1, 2, 3, 4, 1, 2]] * 2 + [[7, 8, 9, 7, 8, 9, 7]] * 1 + [[5, 5, 6, 6]] * 4
    res = leader_cluster(_bag(seqs))
    top = cluster_report(res, top_n=1, order="size")
    assert top[0]["centroid_units"] == [5, 5, 6, 6]
    assert cluster_report(res, top_n=1)[0]["centroid_length"] == 7
    assert cluster_report(ClusteringResult([], [], 1)) == []
    with pytest.raises(ValueError):
        cluster_report(res, order="alphabetical")
