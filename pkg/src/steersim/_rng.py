"""Named, reproducible random streams.

Every randomized stage draws from ``stream(seed, "stage", ...)`` so results do
not depend on the order in which stages run or on thread counts.
"""

from __future__ import annotations

import zlib

import numpy as np


def _word(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be nonnegative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_word(seed), *map(_word, keys)]))


def derive_seed(seed: int, *keys) -> int:
    """A 32-bit integer seed for APIs that take plain integers."""
    return int(np.random.SeedSequence([_word(seed), *map(_word, keys)]).generate_state(1)[0])
