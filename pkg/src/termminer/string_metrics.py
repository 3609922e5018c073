"""Edit distances over unit-label sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class MiningConfig:
    """Leader-clustering parameters.

    ``radius_T`` is the cluster radius, ``sep_a`` the centroid separation
    factor (new centroids must be farther than ``sep_a * radius_T`` from all
    others) and ``norm_b`` the scale of the normalized edit distance.
    """

    radius_T: float = 1.4
    sep_a: float = 1.8
    norm_b: float = 4.0
    min_length: int = 4

    def __post_init__(self) -> None:
        if not self.radius_T > 0:
            raise ValueError(f"radius_T must be > 0, got {self.radius_T}")
        if not self.sep_a > 0:
            raise ValueError(f"sep_a must be > 0, got {self.sep_a}")
        if not self.norm_b > 0:
            raise ValueError(f"norm_b must be > 0, got {self.norm_b}")
        if self.min_length < 1:
            raise ValueError(f"min_length must be >= 1, got {self.min_length}")

    @property
    def separation(self) -> float:
        return self.sep_a * self.radius_T


def levenshtein(x: Sequence, y: Sequence) -> int:
    """Unit-cost edit distance (insert, delete, substitute)."""
    if len(x) < len(y):
        x, y = y, x
    if not y:
        return len(x)
    prev = list(range(len(y) + 1))
    for i, xi in enumerate(x, 1):
        cur = [i]
        for j, yj in enumerate(y, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (xi != yj)))
        prev = cur
    return prev[-1]


def normalized_levenshtein(x: Sequence, y: Sequence, b: float = 4.0) -> float:
    """Length-normalized edit distance ``b * L(x, y) / sqrt(|x|^2 + |y|^2)``.

    Long sequences tolerate more edits than short ones at the same value.
    """
    if not b > 0:
        raise ValueError(f"b must be > 0, got {b}")
    denom = math.sqrt(len(x) ** 2 + len(y) ** 2)
    if denom == 0:
        raise ValueError("normalized_levenshtein is undefined for two empty sequences")
    return b * levenshtein(x, y) / denom
