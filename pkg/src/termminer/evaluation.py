"""Scoring discovered clusters: purity against ground truth and n-gram coverage."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .leader import ClusteringResult
from .string_metrics import normalized_levenshtein
from .synthesis import GroundTruth

FILLER = "filler"

# "is", "a", "the" plus the usual closed-class English words
DEFAULT_STOPWORDS = frozenset(
    """
    a an the is are was were be been being am
    of to in on at by for with from into onto about as than
    and or but nor so if then that this these those there here
    it its i you he she we they me him her us them my your our their his
    do does did has have had will would shall should can could may might must
    not no yes what which who whom whose when where why how
    all any some each every both either neither such
    up down out off over under again just only also very too
    """.split()
)

DEFAULT_TOP_N = {3: 10, 2: 20, 1: 30}

VERDICTS = ("match", "partial-match-counted", "mismatch", "uncovered")


@dataclass
class ClusterPurity:
    cluster_id: int
    dominant_label: str
    purity: float
    size: int
    label_counts: dict[str, int]


@dataclass
class PurityReport:
    clusters: list[ClusterPurity]

    @property
    def weighted_purity(self) -> float:
        total = sum(c.size for c in self.clusters)
        if total == 0:
            return 0.0
        return sum(c.purity * c.size for c in self.clusters) / total

    def to_dict(self) -> dict:
        return {
            "weighted_purity": self.weighted_purity,
            "clusters": [
                {
                    "cluster_id": c.cluster_id,
                    "dominant_label": c.dominant_label,
                    "purity": c.purity,
                    "size": c.size,
                    "label_counts": c.label_counts,
                }
                for c in self.clusters
            ],
        }


@dataclass
class NgramVerdict:
    ngram: str
    n: int
    count: int
    verdict: str

    @property
    def counted(self) -> bool:
        return self.verdict in ("match", "partial-match-counted")


@dataclass
class CoverageReport:
    verdicts: list[NgramVerdict] = field(default_factory=list)

    @property
    def examined(self) -> int:
        return len(self.verdicts)

    @property
    def matched(self) -> int:
        return sum(v.counted for v in self.verdicts)

    @property
    def matching_rate(self) -> float:
        return self.matched / self.examined if self.verdicts else 0.0

    def rate_for(self, n: int) -> float:
        vs = [v for v in self.verdicts if v.n == n]
        return sum(v.counted for v in vs) / len(vs) if vs else 0.0

    def to_dict(self) -> dict:
        return {
            "examined": self.examined,
            "matched": self.matched,
            "matching_rate": self.matching_rate,
            "verdicts": [vars(v) for v in self.verdicts],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "ngram", "count", "verdict"])
        for v in self.verdicts:
            w.writerow([v.n, v.ngram, v.count, v.verdict])
        return buf.getvalue()


def _member_label(truth: GroundTruth, utt_id: str, span: tuple[int, int]) -> str:
    if utt_id not in truth.occurrences:
        raise ValueError(f"utterance {utt_id!r} has no ground truth")
    best_kid, best_overlap = None, 0
    for kid, (s, e) in truth.occurrences[utt_id]:
        overlap = min(e, span[1]) - max(s, span[0])
        if overlap > best_overlap or (overlap == best_overlap and overlap > 0 and kid < best_kid):
            best_kid, best_overlap = kid, overlap
    return FILLER if best_kid is None else truth.keyword_name(best_kid)


def cluster_purity(result: ClusteringResult, truth: GroundTruth) -> PurityReport:
    """Label members by their best-overlapping keyword occurrence and score each cluster."""
    out = []
    for c in result.clusters:
        counts = Counter(_member_label(truth, m.source_utt, m.source_span) for m in c.members)
        label, top = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        out.append(ClusterPurity(c.cluster_id, label, top / len(c.members), len(c.members), dict(sorted(counts.items()))))
    return PurityReport(out)


def recovered_keywords(result: ClusteringResult, truth: GroundTruth, tolerance: float | None = None, b: float = 4.0) -> set[int]:
    """Keywords recovered as cluster centroids.

    With ``tolerance=None`` the planted sequence must equal a centroid
    exactly; otherwise some centroid must lie strictly within ``tolerance``
    in normalized edit distance.
    """
    centroids = {c.centroid for c in result.clusters}
    if tolerance is None:
        return {kid for kid, seq in truth.inventory.items() if tuple(seq) in centroids}
    return {
        kid
        for kid, seq in truth.inventory.items()
        if any(normalized_levenshtein(seq, c, b) < tolerance for c in centroids)
    }


def cluster_word_labels(purity: PurityReport, min_purity: float = 0.5) -> dict[int, list[str]]:
    """Word labels for clusters whose dominant label is a keyword."""
    return {
        c.cluster_id: [c.dominant_label]
        for c in purity.clusters
        if c.dominant_label != FILLER and c.purity >= min_purity
    }


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def _count_ngrams(words: Sequence[str], n: int, stop: set[str], counts: Counter) -> None:
    words = [t.lower() for t in words]
    for i in range(len(words) - n + 1):
        gram = words[i:i + n]
        if all(w in stop for w in gram):
            continue
        counts[" ".join(gram)] += 1


def _ranked(counts: Counter) -> list[tuple[str, int]]:
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def ngram_counts(tokens: Sequence[str], n: int, stopwords: Iterable[str] = DEFAULT_STOPWORDS) -> list[tuple[str, int]]:
    """Count word n-grams, dropping those made only of stopwords.

    Mixed n-grams such as "an object" are kept.  Ranked by count, then
    alphabetically.
    """
    if n not in (1, 2, 3):
        raise ValueError(f"n must be 1, 2 or 3, got {n}")
    counts: Counter[str] = Counter()
    _count_ngrams(tokens, n, {w.lower() for w in stopwords}, counts)
    return _ranked(counts)


def _verdict(gram: str, labels: list[set[str]], function_words: set[str]) -> str:
    content = {w for w in gram.split() if w not in function_words}
    if not content:
        content = set(gram.split())
    if any(content <= lab for lab in labels):
        return "match"
    covered = set().union(*labels) & content if labels else set()
    if covered == content:
        return "partial-match-counted"
    if covered:
        return "mismatch"
    return "uncovered"


def coverage_match(
    cluster_labels: Mapping[int, str | Sequence[str]],
    ngrams: Mapping[int, Sequence[tuple[str, int]]] | Sequence[tuple[str, int]],
    function_words: Iterable[str] = DEFAULT_STOPWORDS,
) -> CoverageReport:
    """Decide for each n-gram whether the discovered clusters cover it.

    A single cluster label holding every content word of the n-gram is a
    match, whatever function words are left over.  Content words that are
    only covered by several clusters together count as a partial match.  A
    content word that no cluster holds makes it a mismatch, or uncovered if
    no content word is held at all.

    ``cluster_labels`` maps cluster ids to one word string or to alternative
    word strings; ``ngrams`` is either one ranked list or a mapping from
    ``n`` to ranked lists.
    """
    fw = {w.lower() for w in function_words}
    labels: list[set[str]] = []
    for lab in cluster_labels.values():
        alts = [lab] if isinstance(lab, str) else list(lab)
        labels.extend(set(tokenize(a)) for a in alts)
    groups = ngrams.items() if isinstance(ngrams, Mapping) else [(None, ngrams)]
    report = CoverageReport()
    for n, ranked in groups:
        for gram, count in ranked:
            report.verdicts.append(NgramVerdict(gram, n or len(gram.split()), count, _verdict(gram, labels, fw)))
    return report


def top_ngrams(
    transcripts: Sequence[Sequence[str]],
    top_n: Mapping[int, int] = DEFAULT_TOP_N,
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
) -> dict[int, list[tuple[str, int]]]:
    """Most frequent n-grams per order, counted within each transcript line."""
    stop = {w.lower() for w in stopwords}
    out = {}
    for n, k in sorted(top_n.items(), reverse=True):
        counts: Counter[str] = Counter()
        for words in transcripts:
            _count_ngrams(words, n, stop, counts)
        out[n] = _ranked(counts)[:k]
    return out


def load_stopwords(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as f:
        return frozenset(w.lower() for line in f for w in line.split() if not w.startswith("#"))
