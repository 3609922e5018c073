"""Synthetic corpora with planted keywords, and Gaussian segment features."""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field

import numpy as np

from .segment_clustering import UnitSequence
from .segmentation import BoundaryHypothesisSet, FrameMatrix
from .string_metrics import levenshtein

Span = tuple[int, int]

FILLER_WORDS = (
    "the", "a", "of", "is", "to", "and", "in", "that", "so", "we",
    "it", "this", "you", "can", "be", "right", "here", "now", "okay", "one",
)


@dataclass(frozen=True)
class SynthConfig:
    alphabet_size: int = 55
    num_keywords: int = 5
    keyword_length: tuple[int, int] = (8, 8)
    num_utterances: int = 20
    utterance_length: tuple[int, int] = (30, 50)
    occurrences_per_keyword: int = 3
    # None places keywords freely; 1 gives every keyword occurrence its own utterance
    max_keywords_per_utterance: int | None = None
    substitution_rate: float = 0.0
    insertion_rate: float = 0.0
    deletion_rate: float = 0.0
    noise_filler: bool = False
    # keywords are redrawn until pairwise edit distances reach this value
    min_keyword_distance: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "keyword_length", tuple(self.keyword_length))
        object.__setattr__(self, "utterance_length", tuple(self.utterance_length))
        rates = (self.substitution_rate, self.insertion_rate, self.deletion_rate)
        if any(not 0.0 <= r <= 1.0 for r in rates) or sum(rates) > 1.0 + 1e-12:
            raise ValueError(f"noise rates must lie in [0, 1] and sum to at most 1, got {rates}")
        if self.alphabet_size < 2:
            raise ValueError("alphabet_size must be >= 2")
        for name in ("keyword_length", "utterance_length"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must be a range 1 <= lo <= hi, got {(lo, hi)}")
        if self.max_keywords_per_utterance is not None and self.max_keywords_per_utterance < 1:
            raise ValueError("max_keywords_per_utterance must be >= 1 or None")
        if self.num_keywords < 0 or self.num_utterances < 1 or self.occurrences_per_keyword < 0:
            raise ValueError("counts must be non-negative and num_utterances >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["keyword_length"] = list(self.keyword_length)
        d["utterance_length"] = list(self.utterance_length)
        return d


@dataclass
class GroundTruth:
    inventory: dict[int, tuple[int, ...]]
    occurrences: dict[str, list[tuple[int, Span]]]
    words: dict[str, list[tuple[str, Span]]] = field(default_factory=dict)

    def keyword_name(self, kid: int) -> str:
        return f"kw{kid}"

    def transcript(self, utt_id: str) -> list[str]:
        return [w for w, _ in self.words.get(utt_id, [])]

    def to_dict(self) -> dict:
        return {
            "inventory": {str(k): list(v) for k, v in sorted(self.inventory.items())},
            "occurrences": {u: [[k, list(s)] for k, s in occ] for u, occ in self.occurrences.items()},
            "words": {u: [[w, list(s)] for w, s in ws] for u, ws in self.words.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            inventory={int(k): tuple(v) for k, v in d["inventory"].items()},
            occurrences={u: [(int(k), (int(s[0]), int(s[1]))) for k, s in occ] for u, occ in d["occurrences"].items()},
            words={u: [(str(w), (int(s[0]), int(s[1]))) for w, s in ws] for u, ws in d.get("words", {}).items()},
        )


def _draw_keywords(cfg: SynthConfig, rng: random.Random) -> dict[int, tuple[int, ...]]:
    inventory: dict[int, tuple[int, ...]] = {}
    for kid in range(cfg.num_keywords):
        for _ in range(10_000):
            length = rng.randint(*cfg.keyword_length)
            kw = tuple(rng.randrange(cfg.alphabet_size) for _ in range(length))
            if all(levenshtein(kw, other) >= cfg.min_keyword_distance for other in inventory.values()):
                inventory[kid] = kw
                break
        else:
            raise ValueError(f"could not draw {cfg.num_keywords} keywords at edit distance >= {cfg.min_keyword_distance}")
    return inventory


def _noisy(tokens, cfg: SynthConfig, rng: random.Random) -> list[int]:
    p_sub, p_ins, p_del = cfg.substitution_rate, cfg.insertion_rate, cfg.deletion_rate
    if p_sub == p_ins == p_del == 0.0:
        return list(tokens)
    out = []
    for t in tokens:
        r = rng.random()
        if r < p_sub:
            out.append((t + rng.randrange(1, cfg.alphabet_size)) % cfg.alphabet_size)
        elif r < p_sub + p_ins:
            out.append(t)
            out.append(rng.randrange(cfg.alphabet_size))
        elif r < p_sub + p_ins + p_del:
            continue
        else:
            out.append(t)
    if not out:
        # an occurrence must keep at least one token to stay locatable
        out.append(tokens[0])
    return out


def generate_corpus(cfg: SynthConfig) -> tuple[list[UnitSequence], GroundTruth]:
    """Filler utterances with keyword occurrences planted at random, non-overlapping places.

    Every occurrence of a keyword goes into a different utterance while there
    are utterances left to choose from.  Noise is applied per token inside
    keyword occurrences (and to filler too with ``noise_filler``); the ground
    truth spans refer to the tokens actually emitted.
    """
    rng = random.Random(cfg.seed)
    inventory = _draw_keywords(cfg, rng)
    utt_ids = [f"utt{i:04d}" for i in range(cfg.num_utterances)]

    planted: dict[str, list[int]] = {u: [] for u in utt_ids}
    cap = cfg.max_keywords_per_utterance
    for kid in inventory:
        n = cfg.occurrences_per_keyword
        free = [u for u in utt_ids if cap is None or len(planted[u]) < cap]
        if n <= len(free):
            hosts = rng.sample(free, n)
        elif cap is None:
            hosts = [rng.choice(utt_ids) for _ in range(n)]
        else:
            raise ValueError(f"cannot place {n} occurrences of keyword {kid} with at most {cap} keyword(s) per utterance")
        for u in hosts:
            planted[u].append(kid)

    corpus: list[UnitSequence] = []
    occurrences: dict[str, list[tuple[int, Span]]] = {}
    words: dict[str, list[tuple[str, Span]]] = {}
    for u in utt_ids:
        kids = planted[u]
        rng.shuffle(kids)
        total = rng.randint(*cfg.utterance_length)
        kw_tokens = sum(len(inventory[k]) for k in kids)
        n_filler = total - kw_tokens
        if n_filler < 0:
            raise ValueError(f"{u}: planted keywords ({kw_tokens} tokens) do not fit in {total} tokens")
        # split the filler into len(kids) + 1 gaps
        cuts = sorted(rng.randint(0, n_filler) for _ in kids)
        gaps = [b - a for a, b in zip([0] + cuts, cuts + [n_filler])]

        tokens: list[int] = []
        occ: list[tuple[int, Span]] = []
        ws: list[tuple[str, Span]] = []

        def emit_filler(count: int) -> None:
            raw = [rng.randrange(cfg.alphabet_size) for _ in range(count)]
            if cfg.noise_filler and raw:
                raw = _noisy(raw, cfg, rng)
            for t in raw:
                ws.append((rng.choice(FILLER_WORDS), (len(tokens), len(tokens) + 1)))
                tokens.append(t)

        for gap, kid in zip(gaps, kids):
            emit_filler(gap)
            seq = _noisy(inventory[kid], cfg, rng)
            span = (len(tokens), len(tokens) + len(seq))
            tokens.extend(seq)
            occ.append((kid, span))
            ws.append((f"kw{kid}", span))
        emit_filler(gaps[-1])
        corpus.append(UnitSequence(u, tuple(tokens)))
        occurrences[u] = occ
        words[u] = ws
    return corpus, GroundTruth(inventory, occurrences, words)


def blob_means(k: int, dim: int, scale: float = 10.0) -> np.ndarray:
    """Well-separated means: scaled unit vectors, stepped outward once the axes run out.

    Any two means are at least ``scale`` apart.
    """
    means = np.zeros((k, dim))
    for i in range(k):
        means[i, i % dim] = scale * (1 + i // dim)
    return means


def generate_features(k: int, dim: int, points_per_cluster: int, spread: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    if k < 1 or dim < 1 or points_per_cluster < 1:
        raise ValueError("k, dim and points_per_cluster must all be >= 1")
    if not spread > 0:
        raise ValueError(f"spread must be > 0, got {spread}")
    rng = np.random.default_rng(seed)
    means = blob_means(k, dim)
    labels = np.repeat(np.arange(k), points_per_cluster)
    X = means[labels] + rng.normal(0.0, spread, size=(len(labels), dim))
    return X, labels


def generate_frames(
    corpus: list[UnitSequence],
    alphabet_size: int,
    dim: int = 8,
    frames_per_token: tuple[int, int] = (3, 8),
    spread: float = 0.5,
    num_hypotheses: int = 5,
    jitter_ms: float = 4.0,
    frame_period_ms: float = 10.0,
    seed: int = 0,
) -> tuple[list[FrameMatrix], list[BoundaryHypothesisSet]]:
    """Render unit sequences as frame features with jittered boundary hypotheses.

    Each token becomes a run of frames scattered around its unit's mean; each
    hypothesis set perturbs the true token boundaries by up to ``jitter_ms``.
    """
    rng = np.random.default_rng(seed)
    means = blob_means(alphabet_size, dim)
    frames_out, hyps_out = [], []
    for utt in corpus:
        lengths = rng.integers(frames_per_token[0], frames_per_token[1] + 1, size=len(utt.units))
        labels = np.repeat(np.asarray(utt.units, dtype=int), lengths)
        F = means[labels] + rng.normal(0.0, spread, size=(len(labels), dim))
        edges = np.cumsum(lengths)[:-1] * frame_period_ms
        hyps = []
        for _ in range(num_hypotheses):
            h = edges + rng.uniform(-jitter_ms, jitter_ms, size=len(edges))
            hyps.append(tuple(float(round(t, 3)) for t in h))
        frames_out.append(FrameMatrix(utt.utt_id, np.round(F, 6), frame_period_ms))
        hyps_out.append(BoundaryHypothesisSet(utt.utt_id, tuple(hyps)))
    return frames_out, hyps_out
