"""Leader clustering of mined subsequences under normalized edit distance.

One round is: promote far-away entries to centroids, assign every entry to
its nearest centroid inside the radius, then move each centroid to the
member with the smallest total distance to the rest of its cluster.  Rounds
repeat, keeping the updated centroids, until the number of clusters stops
changing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .alignment import BagEntry, SubsequenceBag
from .string_metrics import MiningConfig, normalized_levenshtein

logger = logging.getLogger(__name__)

DEFAULT_MAX_ROUNDS = 50

Units = tuple[int, ...]


@dataclass
class KeywordCluster:
    cluster_id: int
    centroid: Units
    members: list[BagEntry]
    total_intra_distance: float

    @property
    def size(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "centroid_units": list(self.centroid),
            "member_count": len(self.members),
            "total_intra_distance": self.total_intra_distance,
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KeywordCluster":
        return cls(
            cluster_id=int(d["cluster_id"]),
            centroid=tuple(int(u) for u in d["centroid_units"]),
            members=[BagEntry.from_dict(m) for m in d["members"]],
            total_intra_distance=float(d.get("total_intra_distance", 0.0)),
        )


@dataclass
class ClusteringResult:
    clusters: list[KeywordCluster]
    unassigned: list[BagEntry]
    rounds_run: int

    def to_dict(self) -> dict:
        return {
            "rounds_run": self.rounds_run,
            "clusters": [c.to_dict() for c in self.clusters],
            "unassigned": [e.to_dict() for e in self.unassigned],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusteringResult":
        return cls(
            clusters=[KeywordCluster.from_dict(c) for c in d["clusters"]],
            unassigned=[BagEntry.from_dict(e) for e in d.get("unassigned", [])],
            rounds_run=int(d["rounds_run"]),
        )


@dataclass
class RoundTrace:
    """What happened in one round; filled only when a trace list is passed."""

    created: list[tuple[Units, list[float]]] = field(default_factory=list)
    centroids: list[Units] = field(default_factory=list)
    assignment: dict[Units, int | None] = field(default_factory=dict)
    updated: list[Units] = field(default_factory=list)


def canonical_order(entries: Iterable[BagEntry]) -> list[BagEntry]:
    """Longest first, then by unit labels, then by provenance."""
    return sorted(entries, key=lambda e: (-len(e.units), e.units, e.source_utt, e.source_span, e.pair_utt, e.pair_span))


class _DistanceCache:
    def __init__(self, b: float):
        self.b = b
        self._cache: dict[tuple[Units, Units], float] = {}

    def __call__(self, x: Units, y: Units) -> float:
        if x == y:
            return 0.0
        key = (x, y) if x < y else (y, x)
        d = self._cache.get(key)
        if d is None:
            d = normalized_levenshtein(x, y, self.b)
            self._cache[key] = d
        return d


def _nearest(u: Units, centroids: Sequence[Units], dist, radius: float) -> int | None:
    best, best_d = None, radius
    for idx, c in enumerate(centroids):
        d = dist(u, c)
        if d < best_d:
            best, best_d = idx, d
    return best


def _medoid(members: Sequence[Units], counts: dict[Units, int], dist) -> Units:
    # members are distinct unit tuples in canonical order; ties keep the earliest
    best, best_total = None, None
    for cand in members:
        total = sum(counts[m] * dist(cand, m) for m in members)
        if best_total is None or total < best_total:
            best, best_total = cand, total
    return best


def leader_cluster(
    bag: SubsequenceBag | Sequence[BagEntry],
    cfg: MiningConfig = MiningConfig(),
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    trace: list[RoundTrace] | None = None,
) -> ClusteringResult:
    """Cluster bag entries around medoid centroids.

    Entries farther than ``cfg.separation`` from every existing centroid
    become new centroids; entries within ``cfg.radius_T`` of a centroid join
    the nearest one (lowest centroid index on ties); the rest stay
    unassigned.  Convergence means an unchanged cluster count.  The returned
    membership comes from one last assignment against the converged
    centroids, so every member lies strictly inside the radius.
    """
    entries = canonical_order(bag)
    if not entries:
        raise ValueError("cannot cluster an empty bag")
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")

    # work on distinct unit sequences; provenance never changes a distance
    counts: dict[Units, int] = {}
    for e in entries:
        counts[e.units] = counts.get(e.units, 0) + 1
    uniq = list(counts)
    dist = _DistanceCache(cfg.norm_b)

    centroids: list[Units] = [uniq[0]]
    prev_count = None
    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        rt = RoundTrace() if trace is not None else None
        for u in uniq:
            ds = [dist(u, c) for c in centroids]
            if all(d > cfg.separation for d in ds):
                centroids.append(u)
                if rt is not None:
                    rt.created.append((u, ds))
        groups: list[list[Units]] = [[] for _ in centroids]
        for u in uniq:
            k = _nearest(u, centroids, dist, cfg.radius_T)
            if k is not None:
                groups[k].append(u)
            if rt is not None:
                rt.assignment[u] = k
        updated: list[Units] = []
        for g in groups:
            if not g:
                continue
            m = _medoid(g, counts, dist)
            if m not in updated:
                updated.append(m)
        if rt is not None:
            rt.centroids = list(centroids)
            rt.updated = list(updated)
            trace.append(rt)
        centroids = updated
        logger.debug("round %d: %d clusters", rounds, len(centroids))
        if len(centroids) == prev_count:
            break
        prev_count = len(centroids)

    members: list[list[BagEntry]] = [[] for _ in centroids]
    unassigned: list[BagEntry] = []
    for e in entries:
        k = _nearest(e.units, centroids, dist, cfg.radius_T)
        if k is None:
            unassigned.append(e)
        else:
            members[k].append(e)
    clusters = []
    for c, ms in zip(centroids, members):
        if not ms:
            continue
        clusters.append(
            KeywordCluster(
                cluster_id=len(clusters),
                centroid=c,
                members=ms,
                total_intra_distance=sum(dist(c, m.units) for m in ms),
            )
        )
    logger.info("%d clusters, %d unassigned after %d round(s)", len(clusters), len(unassigned), rounds)
    return ClusteringResult(clusters, unassigned, rounds)


def cluster_report(result: ClusteringResult, top_n: int = 10, order: str = "centroid_length") -> list[dict]:
    """Largest clusters first, by centroid length or by member count."""
    if order == "centroid_length":
        key = lambda c: (-len(c.centroid), c.cluster_id)  # noqa: E731
    elif order == "size":
        key = lambda c: (-c.size, c.cluster_id)  # noqa: E731
    else:
        raise ValueError(f"unknown order {order!r}")
    ranked = sorted(result.clusters, key=key)[:top_n]
    return [
        {
            "cluster_id": c.cluster_id,
            "centroid_units": list(c.centroid),
            "centroid_length": len(c.centroid),
            "size": c.size,
        }
        for c in ranked
    ]
