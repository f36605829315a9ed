from fractions import Fraction

import numpy as np

from onespace.models import Category
from onespace.sampling import (
    EMPTY_TALLY,
    ChunkTally,
    cell_counts,
    cumulative_thresholds,
    pick_index,
    tally_chunk,
)
from onespace.streams import WORDS_PER_TRIAL, category_key, to_unit, trial_words


def test_trial_words_do_not_depend_on_chunking():
    whole = trial_words(seed=42, category_index=1, start=0, count=100)
    assert whole.shape == (100, WORDS_PER_TRIAL)
    pieces = np.vstack([trial_words(42, 1, start, 25) for start in range(0, 100, 25)])
    assert np.array_equal(whole, pieces)
    assert np.array_equal(whole[37:38], trial_words(42, 1, 37, 1))


def test_categories_get_distinct_streams():
    assert category_key(5, 0) != category_key(5, 1)
    assert not np.array_equal(trial_words(5, 0, 0, 8), trial_words(5, 1, 0, 8))
    assert not np.array_equal(trial_words(5, 0, 0, 8), trial_words(6, 0, 0, 8))


def test_to_unit_range():
    words = np.array([0, 2**64 - 1, 2**63], dtype=np.uint64)
    u = to_unit(words)
    assert u[0] == 0.0
    assert 0.0 <= u[1] < 1.0
    assert u[2] == 0.5


def test_cumulative_thresholds_end_at_one():
    thresholds = cumulative_thresholds([Fraction(1, 3)] * 3)
    assert thresholds[-1] == 1.0
    thresholds = cumulative_thresholds([Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)])
    assert list(thresholds) == [0.25, 0.5, 1.0]


def test_pick_index():
    thresholds = np.array([0.25, 0.5, 1.0])
    u = np.array([0.0, 0.2499, 0.25, 0.3, 0.75, 0.999999])
    assert list(pick_index(thresholds, u)) == [0, 0, 1, 1, 2, 2]


def test_cell_counts_order():
    a = np.array([1, 1, -1, -1, 1])
    b = np.array([1, -1, 1, -1, 1])
    assert cell_counts(a, b) == (2, 1, 1, 1)


def test_chunk_tally_merge():
    left = ChunkTally((1, 2, 3, 4), 0.5, 0.9)
    right = ChunkTally((4, 3, 2, 1), 0.1, 0.7)
    merged = left.merge(right)
    assert merged == ChunkTally((5, 5, 5, 5), 0.1, 0.9)
    assert EMPTY_TALLY.merge(left) == left
    assert left.merge(right) == right.merge(left)


def test_tally_chunk_time_slot(time_slot_model):
    tally = tally_chunk(time_slot_model, Category(station1="b", station2="c"), 2, 9, 0, 5000)
    assert sum(tally.counts) == 5000
    assert 4.0 <= tally.first_time <= tally.last_time < 5.0
    # (1/8, 3/8, 3/8, 1/8): anticorrelated cells dominate
    assert tally.counts[1] + tally.counts[2] > tally.counts[0] + tally.counts[3]


def test_tally_chunk_source_only(source_model):
    tally = tally_chunk(source_model, Category(station1="a", station2="b"), 0, 3, 0, 1000)
    assert sum(tally.counts) == 1000
    assert tally.first_time is None


def test_tally_chunks_add_up(angle_model):
    category = Category(station1="a1", station2="b2")
    whole = tally_chunk(angle_model, category, 1, 11, 0, 3000)
    split = tally_chunk(angle_model, category, 1, 11, 0, 1000).merge(tally_chunk(angle_model, category, 1, 11, 1000, 2000))
    assert whole == split
