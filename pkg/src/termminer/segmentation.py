"""Boundary merging and segment-level feature averaging."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_WINDOW_MS = 20.0


@dataclass(frozen=True)
class FrameMatrix:
    utt_id: str
    frames: np.ndarray
    frame_period_ms: float = 10.0

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"{self.utt_id}: frames must be a non-empty 2-D array, got shape {frames.shape}")
        if not self.frame_period_ms > 0:
            raise ValueError(f"{self.utt_id}: frame_period_ms must be > 0")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def duration_ms(self) -> float:
        return self.num_frames * self.frame_period_ms


@dataclass(frozen=True)
class BoundaryHypothesisSet:
    utt_id: str
    hypotheses: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        hyps = tuple(tuple(float(t) for t in h) for h in self.hypotheses)
        for h in hyps:
            if any(t < 0 for t in h):
                raise ValueError(f"{self.utt_id}: negative boundary time")
            if any(b <= a for a, b in zip(h, h[1:])):
                raise ValueError(f"{self.utt_id}: boundary hypothesis not strictly increasing: {h}")
        object.__setattr__(self, "hypotheses", hyps)


@dataclass(frozen=True, order=True)
class Segment:
    start_frame: int
    end_frame: int

    def __post_init__(self) -> None:
        if not 0 <= self.start_frame < self.end_frame:
            raise ValueError(f"invalid segment [{self.start_frame}, {self.end_frame})")

    def __len__(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class SegmentFeature:
    utt_id: str
    segment: Segment
    vector: np.ndarray


def merge_boundaries(hyps: BoundaryHypothesisSet | Sequence[Sequence[float]], window_ms: float = DEFAULT_WINDOW_MS) -> list[float]:
    """Pool boundary hypotheses and merge those closer than ``window_ms``.

    Sorted boundaries are chained left to right while the gap to the previous
    one is at most ``window_ms``; each chain is replaced by its mean.
    """
    if not window_ms > 0:
        raise ValueError(f"window_ms must be > 0, got {window_ms}")
    hypotheses = hyps.hypotheses if isinstance(hyps, BoundaryHypothesisSet) else hyps
    pooled = sorted(float(t) for h in hypotheses for t in h)
    if not pooled:
        raise ValueError("no boundaries")
    groups = [[pooled[0]]]
    for t in pooled[1:]:
        if t - groups[-1][-1] <= window_ms:
            groups[-1].append(t)
        else:
            groups.append([t])
    return [math.fsum(g) / len(g) for g in groups]


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def segments_from_boundaries(boundaries: Sequence[float], frames: FrameMatrix) -> list[Segment]:
    n = frames.num_frames
    cuts = {0, n}
    for t in boundaries:
        cuts.add(min(max(_round_half_up(t / frames.frame_period_ms), 0), n))
    cuts = sorted(cuts)
    return [Segment(s, e) for s, e in zip(cuts, cuts[1:]) if e > s]


def segment_feature(frames: FrameMatrix, seg: Segment) -> SegmentFeature:
    if seg.end_frame > frames.num_frames:
        raise ValueError(f"segment {seg} exceeds {frames.num_frames} frames of {frames.utt_id}")
    vec = frames.frames[seg.start_frame:seg.end_frame].mean(axis=0)
    return SegmentFeature(frames.utt_id, seg, vec)


def segment_utterance(
    frames: FrameMatrix,
    hyps: BoundaryHypothesisSet | None,
    window_ms: float = DEFAULT_WINDOW_MS,
) -> list[SegmentFeature]:
    """Merged segmentation of one utterance with its averaged features."""
    boundaries: list[float] = []
    if hyps is not None and any(hyps.hypotheses):
        boundaries = merge_boundaries(hyps, window_ms)
    return [segment_feature(frames, s) for s in segments_from_boundaries(boundaries, frames)]
