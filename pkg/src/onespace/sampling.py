"""Evaluate a contiguous chunk of trials for one category.

A chunk reduces to four outcome counts plus the earliest and latest
measurement time it saw. Merging chunks is addition and min/max, so the
order in which chunks finish never matters.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
from typing import Optional

import numpy as np

from onespace.models import AngleSourceModel, Category, FiniteSourceModel, TimeSlotModel
from onespace.streams import to_unit, trial_words

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ChunkTally:
    counts: tuple[int, int, int, int]
    first_time: Optional[float] = None
    last_time: Optional[float] = None

    def merge(self, other: "ChunkTally") -> "ChunkTally":
        counts = tuple(a + b for a, b in zip(self.counts, other.counts))
        return ChunkTally(
            counts,
            _combine(min, self.first_time, other.first_time),
            _combine(max, self.last_time, other.last_time),
        )


EMPTY_TALLY = ChunkTally((0, 0, 0, 0))


def _combine(pick, left, right):
    if left is None:
        return right
    if right is None:
        return left
    return pick(left, right)


def cumulative_thresholds(weights) -> np.ndarray:
    """Exact cumulative sums, converted to float only at the end; the last is exactly 1."""
    return np.array([float(value) for value in accumulate(weights, initial=Fraction(0))][1:])


def pick_index(thresholds: np.ndarray, u: np.ndarray) -> np.ndarray:
    index = np.searchsorted(thresholds, u, side="right")
    return np.minimum(index, len(thresholds) - 1)


def cell_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int, int, int]:
    """Tally (+,+), (+,-), (-,+), (-,-) in that order."""
    cells = 2 * (a < 0) + (b < 0)
    return tuple(int(n) for n in np.bincount(cells, minlength=4))


def _threshold_response(angles: np.ndarray, theta: float) -> np.ndarray:
    return np.where(np.cos(angles - theta) >= 0, 1, -1)


def tally_chunk(model, category: Category, category_index: int, seed: int, start: int, count: int) -> ChunkTally:
    words = trial_words(seed, category_index, start, count)
    u = to_unit(words[:, 0])

    if isinstance(model, FiniteSourceModel):
        lam = pick_index(cumulative_thresholds(model.weights), u)
        a = np.asarray(model.station1[category.station1], dtype=np.int8)[lam]
        b = np.asarray(model.station2[category.station2], dtype=np.int8)[lam]
        return ChunkTally(cell_counts(a, b))

    if isinstance(model, AngleSourceModel):
        lam = TWO_PI * u
        a = _threshold_response(lam, model.station1[category.station1])
        b = model.station2_sign * _threshold_response(lam, model.station2[category.station2])
        return ChunkTally(cell_counts(a, b))

    if isinstance(model, TimeSlotModel):
        density = model.density(category.label)
        cells = pick_index(cumulative_thresholds(density.masses()), u)
        slot = model.slot(category.label)
        times = slot.start + to_unit(words[:, 1]) * (slot.end - slot.start)
        counts = tuple(int(n) for n in np.bincount(cells, minlength=4))
        return ChunkTally(counts, float(times.min()), float(times.max()))

    raise TypeError(f"Unknown model type {type(model).__name__}")
