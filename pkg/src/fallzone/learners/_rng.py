"""Seeded randomness.

Every random draw in the learners comes from numpy's PCG64 bit generator,
seeded through a SeedSequence built from an explicit 64-bit integer seed plus
a tuple of stream ids (tree index, purpose tag, ...). Identical seeds and
stream ids always give identical draws.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

Seed = Union[int, Sequence[int]]


def make_rng(seed: Seed, *stream: int) -> np.random.Generator:
    entropy = [int(seed)] if isinstance(seed, (int, np.integer)) else [int(s) for s in seed]
    if any(e < 0 for e in entropy):
        raise ValueError("seeds must be non-negative integers")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy + [int(s) for s in stream])))
