"""Inexact local alignment of unit sequences and all-pairs subsequence mining.

The alignment recurrence is the classic local one with a floor at zero::

    p(i, j) = max(p(i-1, j-1) + s(a_i, b_j), p(i-1, j) + gap, p(i, j-1) + gap, 0)

With the default ``gap = 0`` the matrix is monotone along rows and columns, so
the last row already holds the best score of the whole matrix.  Tracebacks
start from the local maxima of the last row (``"last_row"``) or from the
local-maximum plateaus of the whole matrix (``"global"``).
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .segment_clustering import UnitSequence

logger = logging.getLogger(__name__)

TRACEBACK_MODES = ("last_row", "global")

Span = tuple[int, int]

_DIAG, _UP, _LEFT = 0, 1, 2


@dataclass(frozen=True)
class ScoringScheme:
    match_score: float = 1.0
    mismatch_score: float = -1.0
    gap_score: float = 0.0

    def __post_init__(self) -> None:
        if not self.match_score > 0:
            raise ValueError(f"match_score must be > 0, got {self.match_score}")
        if not self.mismatch_score < self.match_score:
            raise ValueError("mismatch_score must be < match_score")

    def score(self, a, b) -> float:
        return self.match_score if a == b else self.mismatch_score


@dataclass(frozen=True)
class Alignment:
    """Aligned half-open token spans of A and B and the path score."""

    a_span: Span
    b_span: Span
    score: float


@dataclass(frozen=True, order=True)
class BagEntry:
    units: tuple[int, ...]
    source_utt: str
    source_span: Span
    pair_utt: str
    pair_span: Span
    alignment_score: float = field(default=0.0, compare=False)

    @property
    def key(self) -> tuple:
        return (self.units, self.source_utt, self.source_span, self.pair_utt, self.pair_span)

    def to_dict(self) -> dict:
        return {
            "units": list(self.units),
            "source_utt": self.source_utt,
            "source_span": list(self.source_span),
            "pair_utt": self.pair_utt,
            "pair_span": list(self.pair_span),
            "alignment_score": self.alignment_score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BagEntry":
        return cls(
            units=tuple(int(u) for u in d["units"]),
            source_utt=str(d["source_utt"]),
            source_span=(int(d["source_span"][0]), int(d["source_span"][1])),
            pair_utt=str(d["pair_utt"]),
            pair_span=(int(d["pair_span"][0]), int(d["pair_span"][1])),
            alignment_score=float(d.get("alignment_score", 0.0)),
        )


class SubsequenceBag:
    """Deduplicated collection of bag entries kept in a canonical sorted order.

    Two entries are the same if they agree on units and provenance; the
    alignment score is carried along but does not take part in identity.
    """

    def __init__(self, entries: Iterable[BagEntry] = (), pairs_aligned: int = 0):
        unique: dict[tuple, BagEntry] = {}
        for e in entries:
            prev = unique.get(e.key)
            if prev is None or e.alignment_score > prev.alignment_score:
                unique[e.key] = e
        self.entries: tuple[BagEntry, ...] = tuple(unique[k] for k in sorted(unique))
        self.pairs_aligned = pairs_aligned

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[BagEntry]:
        return iter(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubsequenceBag):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self) -> str:
        return f"SubsequenceBag({len(self.entries)} entries)"

    def union(self, other: "SubsequenceBag") -> "SubsequenceBag":
        return SubsequenceBag(
            itertools.chain(self.entries, other.entries),
            pairs_aligned=self.pairs_aligned + other.pairs_aligned,
        )


def alignment_matrix(a: Sequence, b: Sequence, scheme: ScoringScheme = ScoringScheme()) -> list[list[float]]:
    """Fill the (n+1) x (m+1) local alignment matrix."""
    n, m = len(a), len(b)
    gap = scheme.gap_score
    match, mismatch = scheme.match_score, scheme.mismatch_score
    P = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        ai = a[i - 1]
        prev, row = P[i - 1], P[i]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (match if ai == b[j - 1] else mismatch)
            up = prev[j] + gap
            left = row[j - 1] + gap
            best = diag
            if up > best:
                best = up
            if left > best:
                best = left
            row[j] = best if best > 0 else 0.0
    return P


def _row_peaks(row: list[float]) -> list[int]:
    # leftmost index of every plateau that is a strict local maximum with value > 0
    peaks = []
    m = len(row) - 1
    j = 1
    while j <= m:
        v = row[j]
        k = j
        while k < m and row[k + 1] == v:
            k += 1
        if v > 0 and row[j - 1] < v and (k == m or row[k + 1] < v):
            peaks.append(j)
        j = k + 1
    return peaks


def _matrix_peaks(P: list[list[float]]) -> list[tuple[int, int]]:
    # representative (first in row-major order) of every 8-connected plateau
    # of equal positive values that has no larger neighbour
    n, m = len(P) - 1, len(P[0]) - 1
    seen = [[False] * (m + 1) for _ in range(n + 1)]
    peaks = []
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            v = P[i][j]
            if v <= 0 or seen[i][j]:
                continue
            seen[i][j] = True
            stack = [(i, j)]
            is_peak = True
            while stack:
                ci, cj = stack.pop()
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        ni, nj = ci + di, cj + dj
                        if (di == 0 and dj == 0) or not (0 <= ni <= n and 0 <= nj <= m):
                            continue
                        w = P[ni][nj]
                        if w > v:
                            is_peak = False
                        elif w == v and not seen[ni][nj]:
                            seen[ni][nj] = True
                            stack.append((ni, nj))
            if is_peak:
                peaks.append((i, j))
    return peaks


def _traceback(P, a, b, scheme: ScoringScheme, i: int, j: int) -> Alignment | None:
    # walk back to a zero cell, remembering matched cells; the alignment ends
    # at the highest-valued match on the path (nearest the start on ties)
    gap = scheme.gap_score
    best = first = None
    while P[i][j] > 0:
        v = P[i][j]
        s = scheme.score(a[i - 1], b[j - 1])
        if v == P[i - 1][j - 1] + s:
            if s > 0:
                if best is None or v > P[best[0]][best[1]]:
                    best = (i, j)
                first = (i, j)
            i, j = i - 1, j - 1
        elif v == P[i - 1][j] + gap:
            i -= 1
        elif v == P[i][j - 1] + gap:
            j -= 1
        else:  # pragma: no cover - every positive cell has a predecessor move
            raise RuntimeError(f"broken alignment matrix at ({i}, {j})")
    if best is None:
        return None
    return Alignment(
        a_span=(first[0] - 1, best[0]),
        b_span=(first[1] - 1, best[1]),
        score=P[best[0]][best[1]],
    )


def local_align(
    a: Sequence,
    b: Sequence,
    scheme: ScoringScheme = ScoringScheme(),
    traceback_mode: str = "last_row",
) -> list[Alignment]:
    """Find locally aligned span pairs of ``a`` and ``b``.

    Each traceback follows the best predecessor move (diagonal, then up, then
    left on ties) until it reaches a zero cell.  The path is then cut back to
    its highest-scoring matched cell, so spans start and end on a match and
    trailing stretches that only lower the score are not reported.  Distinct
    start cells that cut back to the same spans are reported once.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("local_align needs two non-empty sequences")
    if traceback_mode not in TRACEBACK_MODES:
        raise ValueError(f"unknown traceback mode {traceback_mode!r}; expected one of {TRACEBACK_MODES}")
    P = alignment_matrix(a, b, scheme)
    if traceback_mode == "last_row":
        n = len(a)
        starts = [(n, j) for j in _row_peaks(P[n])]
    else:
        starts = _matrix_peaks(P)
    out: list[Alignment] = []
    seen = set()
    for i, j in starts:
        aln = _traceback(P, a, b, scheme, i, j)
        if aln is not None and (aln.a_span, aln.b_span) not in seen:
            seen.add((aln.a_span, aln.b_span))
            out.append(aln)
    return out


def extract_bag_entries(
    alignments: Iterable[Alignment],
    a: UnitSequence,
    b: UnitSequence,
    min_length: int = 4,
) -> list[BagEntry]:
    """Turn each alignment into one entry per side, dropping short ones."""
    entries = []
    for aln in alignments:
        for src, src_span, other, other_span in (
            (a, aln.a_span, b, aln.b_span),
            (b, aln.b_span, a, aln.a_span),
        ):
            units = tuple(src.units[src_span[0]:src_span[1]])
            if len(units) < min_length:
                continue
            entries.append(
                BagEntry(
                    units=units,
                    source_utt=src.utt_id,
                    source_span=src_span,
                    pair_utt=other.utt_id,
                    pair_span=other_span,
                    alignment_score=aln.score,
                )
            )
    return entries


def _mine_chunk(args) -> list[BagEntry]:
    pairs, scheme, min_length, traceback_mode = args
    out = []
    for a, b in pairs:
        alns = local_align(a.units, b.units, scheme, traceback_mode)
        out.extend(extract_bag_entries(alns, a, b, min_length))
    return out


def mine_pairs(
    corpus: Sequence[UnitSequence],
    scheme: ScoringScheme = ScoringScheme(),
    min_length: int = 4,
    traceback_mode: str = "last_row",
    jobs: int = 1,
) -> SubsequenceBag:
    """Align every unordered pair of utterances and pool the matched subsequences.

    Within a pair the utterance with the smaller ``utt_id`` plays the role of
    A, so the result depends neither on corpus order nor on ``jobs``.
    """
    if len(corpus) < 2:
        raise ValueError(f"mine_pairs needs at least 2 sequences, got {len(corpus)}")
    ordered = sorted(corpus, key=lambda u: u.utt_id)
    ids = [u.utt_id for u in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("utterance ids must be unique")
    ordered = [u for u in ordered if len(u.units) > 0]
    pairs = list(itertools.combinations(ordered, 2))
    logger.info("aligning %d pairs with %d job(s)", len(pairs), jobs)
    if jobs <= 1 or len(pairs) < 2:
        entries = _mine_chunk((pairs, scheme, min_length, traceback_mode))
    else:
        chunks = [pairs[k::jobs] for k in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_mine_chunk, [(c, scheme, min_length, traceback_mode) for c in chunks])
            entries = list(itertools.chain.from_iterable(parts))
    return SubsequenceBag(entries, pairs_aligned=len(pairs))
