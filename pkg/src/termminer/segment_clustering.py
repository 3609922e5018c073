"""Subword unit inventory: Ward HAC for sizing, k-means codebook, pseudo transcription."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .segmentation import Segment, SegmentFeature

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_CAP = 100_000
DEFAULT_NUM_UNITS = 55
CONVERGENCE_RATE = 0.001


@dataclass(frozen=True)
class Merge:
    cluster_a: int
    cluster_b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge history in scipy's convention.

    Leaves are ``0..n-1``; the cluster formed by merge ``i`` gets id ``n + i``.
    """

    merges: tuple[Merge, ...]
    leaf_count: int
    sample_indices: tuple[int, ...] | None = None

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def to_linkage(self) -> np.ndarray:
        return np.array([[m.cluster_a, m.cluster_b, m.height, m.size] for m in self.merges], dtype=float)

    def to_dict(self) -> dict:
        return {
            "leaf_count": self.leaf_count,
            "merges": [[m.cluster_a, m.cluster_b, m.height, m.size] for m in self.merges],
            "sample_indices": list(self.sample_indices) if self.sample_indices is not None else None,
        }


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.centroids, dtype=float)
        if c.ndim != 2 or c.shape[0] < 2:
            raise ValueError(f"a codebook needs at least 2 centroids, got shape {c.shape}")
        if len(np.unique(c, axis=0)) != len(c):
            raise ValueError("codebook has duplicate centroids")
        object.__setattr__(self, "centroids", c)

    @property
    def R(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def nearest(self, X: np.ndarray) -> np.ndarray:
        return _assign(np.asarray(X, dtype=float), self.centroids)[0]

    def to_dict(self) -> dict:
        return {"dimension": self.dim, "R": self.R, "centroids": self.centroids.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Codebook":
        cb = cls(np.array(d["centroids"], dtype=float))
        if cb.R != d.get("R", cb.R) or cb.dim != d.get("dimension", cb.dim):
            raise ValueError("codebook header does not match centroid rows")
        return cb


@dataclass(frozen=True)
class UnitSequence:
    """Pseudo transcription of one utterance.

    ``spans`` gives each token's frame span; when omitted every token is taken
    to cover one frame.
    """

    utt_id: str
    units: tuple[int, ...]
    spans: tuple[Segment, ...] | None = None

    def __post_init__(self) -> None:
        units = tuple(int(u) for u in self.units)
        object.__setattr__(self, "units", units)
        spans = self.spans
        if spans is None:
            spans = tuple(Segment(i, i + 1) for i in range(len(units)))
        else:
            spans = tuple(s if isinstance(s, Segment) else Segment(*s) for s in spans)
        if len(spans) != len(units):
            raise ValueError(f"{self.utt_id}: {len(units)} units but {len(spans)} spans")
        if any(b.start_frame < a.end_frame for a, b in zip(spans, spans[1:])):
            raise ValueError(f"{self.utt_id}: token spans overlap or are out of order")
        object.__setattr__(self, "spans", spans)

    def __len__(self) -> int:
        return len(self.units)

    def frame_labels(self, num_frames: int | None = None, fill: int = -1) -> list[int]:
        """Expand to one label per frame; frames outside every span get ``fill``."""
        if num_frames is None:
            num_frames = self.spans[-1].end_frame if self.spans else 0
        out = [fill] * num_frames
        for u, s in zip(self.units, self.spans):
            for f in range(s.start_frame, min(s.end_frame, num_frames)):
                out[f] = u
        return out

    def to_dict(self) -> dict:
        return {
            "utt_id": self.utt_id,
            "units": list(self.units),
            "spans": [[s.start_frame, s.end_frame] for s in self.spans],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UnitSequence":
        spans = d.get("spans")
        return cls(
            utt_id=str(d["utt_id"]),
            units=tuple(d["units"]),
            spans=None if spans is None else tuple(Segment(int(s), int(e)) for s, e in spans),
        )


@dataclass
class KMeansResult:
    codebook: Codebook
    assignments: np.ndarray
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _as_matrix(features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"features must be a 2-D array of vectors, got shape {X.shape}")
    return X


def hac_ward(features, sample_cap: int = DEFAULT_SAMPLE_CAP, seed: int = 0) -> Dendrogram:
    """Ward-linkage agglomerative clustering by nearest-neighbour chains.

    Cluster distances are kept squared and updated with the Lance-Williams
    formula; merge heights are reported as their square roots, which for two
    singletons is their Euclidean distance.  The full distance matrix is held
    in memory, hence ``sample_cap``.
    """
    X = _as_matrix(features)
    if X.shape[0] < 2:
        raise ValueError("hac_ward needs at least 2 feature vectors")
    sample = None
    if X.shape[0] > sample_cap:
        rng = np.random.default_rng(seed)
        sample = np.sort(rng.choice(X.shape[0], size=sample_cap, replace=False))
        X = X[sample]
        logger.info("HAC on a %d-point subsample", sample_cap)
    n = X.shape[0]

    sq = (X * X).sum(axis=1)
    D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    raw: list[tuple[int, int, float]] = []
    chain: list[int] = []

    for _ in range(n - 1):
        if not chain:
            chain.append(int(np.flatnonzero(active)[0]))
        while True:
            top = chain[-1]
            row = D[top]
            nn = int(np.argmin(row))
            if len(chain) > 1 and row[chain[-2]] <= row[nn]:
                nn = chain[-2]
            if len(chain) > 1 and nn == chain[-2]:
                break
            chain.append(nn)
        j = chain.pop()
        i = chain.pop()
        i, j = min(i, j), max(i, j)
        dij = D[i, j]
        raw.append((i, j, float(np.sqrt(dij))))
        ni, nj = size[i], size[j]
        nk = size
        others = active.copy()
        others[[i, j]] = False
        upd = ((ni + nk) * D[i] + (nj + nk) * D[j] - nk * dij) / (ni + nj + nk)
        D[i, others] = upd[others]
        D[others, i] = upd[others]
        D[j, :] = np.inf
        D[:, j] = np.inf
        active[j] = False
        size[i] = ni + nj

    # NN-chain finds merges out of height order; sort and relabel through leaf representatives
    order = sorted(range(len(raw)), key=lambda k: (raw[k][2], k))
    parent = list(range(n))
    cluster_id = list(range(n))
    csize = [1] * n

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merges = []
    for step, k in enumerate(order):
        i, j, h = raw[k]
        ri, rj = find(i), find(j)
        a, b = sorted((cluster_id[ri], cluster_id[rj]))
        parent[rj] = ri
        csize[ri] += csize[rj]
        cluster_id[ri] = n + step
        merges.append(Merge(a, b, h, csize[ri]))
    return Dendrogram(tuple(merges), n, None if sample is None else tuple(int(s) for s in sample))


def suggest_k(d: Dendrogram, max_k: int = 100) -> list[tuple[int, float]]:
    """Rank cluster counts by the height gap they sit under.

    Cutting to ``k`` clusters undoes the last ``k - 1`` merges; the gap for
    ``k`` is the height of the merge that would leave ``k - 1`` clusters minus
    the height of the last merge kept (zero when none is kept).  Purely
    advisory.
    """
    h = d.heights
    n = d.leaf_count
    out = []
    for k in range(2, min(max_k, n) + 1):
        below = h[n - k - 1] if n - k - 1 >= 0 else 0.0
        out.append((k, float(h[n - k] - below)))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out


def _assign(X: np.ndarray, C: np.ndarray, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    labels = np.empty(X.shape[0], dtype=np.int64)
    dist = np.empty(X.shape[0])
    for s in range(0, X.shape[0], chunk):
        d2 = ((X[s:s + chunk, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        lab = np.argmin(d2, axis=1)  # first minimum, i.e. lowest centroid index on ties
        labels[s:s + chunk] = lab
        dist[s:s + chunk] = d2[np.arange(len(lab)), lab]
    return labels, dist


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((X - X[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        nxt = int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[idx].copy()


def kmeans(features, k: int = DEFAULT_NUM_UNITS, seed: int = 0, max_iters: int = 300) -> KMeansResult:
    """Lloyd's k-means with k-means++ seeding.

    Iterates until the assignment stops changing or ``max_iters`` assignment
    passes have run.  A centroid left without points is moved onto the point
    currently farthest from its own centroid.
    """
    X = _as_matrix(features)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    distinct = len(np.unique(X, axis=0))
    if k > distinct:
        raise ValueError(f"k={k} exceeds the number of distinct points ({distinct})")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, k, rng)
    history: list[float] = []
    prev = None
    it = 0
    while True:
        labels, dist = _assign(X, C)
        history.append(float(dist.sum()))
        it += 1
        if (prev is not None and np.array_equal(labels, prev)) or it >= max_iters:
            break
        prev = labels
        counts = np.bincount(labels, minlength=k)
        newC = np.zeros_like(C)
        np.add.at(newC, labels, X)
        filled = counts > 0
        newC[filled] /= counts[filled, None]
        if not filled.all():
            far = np.argsort(-dist, kind="stable")
            used = 0
            for j in np.flatnonzero(~filled):
                newC[j] = X[far[used]]
                used += 1
        C = newC
    return KMeansResult(Codebook(C), labels, history, it)


def transcribe(codebook: Codebook, segments: Sequence[SegmentFeature], utt_id: str | None = None) -> UnitSequence:
    """Label each segment with its nearest centroid, keeping segment order."""
    if utt_id is None:
        if not segments:
            raise ValueError("cannot infer utt_id from an empty segment list")
        utt_id = segments[0].utt_id
    if any(s.utt_id != utt_id for s in segments):
        raise ValueError("segments from more than one utterance")
    if not segments:
        return UnitSequence(utt_id, (), ())
    X = np.stack([np.asarray(s.vector, dtype=float) for s in segments])
    if X.shape[1] != codebook.dim:
        raise ValueError(f"feature dimension {X.shape[1]} does not match codebook dimension {codebook.dim}")
    labels = codebook.nearest(X)
    return UnitSequence(utt_id, tuple(int(u) for u in labels), tuple(s.segment for s in segments))


def label_diff_rate(a: Sequence[int], b: Sequence[int]) -> float:
    """Fraction of frames whose labels differ between two labelings."""
    if len(a) != len(b):
        raise ValueError(f"label sequences differ in length: {len(a)} vs {len(b)}")
    if not a:
        return 0.0
    return sum(x != y for x, y in zip(a, b)) / len(a)


def has_converged(a: Sequence[int], b: Sequence[int], threshold: float = CONVERGENCE_RATE) -> bool:
    return label_diff_rate(a, b) < threshold
