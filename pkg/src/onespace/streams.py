"""Counter-based random streams.

Each category gets its own Philox key built from (seed, category index); the
Philox counter is the trial index. Trial i of a category therefore always
reads the same 4-word block no matter how trials are chunked or which thread
evaluates them.
"""

import numpy as np

WORDS_PER_TRIAL = 4
_UNIT_SCALE = 2.0**-53


def category_key(seed: int, category_index: int) -> int:
    """128-bit Philox key: low word is the plan seed, high word the category."""
    return (category_index << 64) | seed


def trial_words(seed: int, category_index: int, start: int, count: int) -> np.ndarray:
    """Random words for trials ``start .. start + count - 1``, shape (count, 4)."""
    bit_generator = np.random.Philox(key=category_key(seed, category_index), counter=start)
    return bit_generator.random_raw(count * WORDS_PER_TRIAL).reshape(count, WORDS_PER_TRIAL)


def to_unit(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in [0, 1) using their top 53 bits."""
    return (words >> np.uint64(11)).astype(np.float64) * _UNIT_SCALE
