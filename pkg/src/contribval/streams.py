"""Counter-keyed random streams.

Every random draw in the library comes from a generator keyed by
``(seed, purpose, *counters)``.  Two calls with the same key always see the
same stream, independent of how many other streams were consumed before or
on which worker they run.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    ORDER = 1      # visiting order of a walk / permutation
    MASK = 2       # Bernoulli inclusion masks
    SUBSET = 3     # uniform subsets (Banzhaf)
    STRICT = 4     # paired-difference Owen masks
    DATA = 10
    PARTITION = 11
    INIT = 12
    TRAIN = 13
    SELECT = 14
    VALUE = 15


def stream(seed: int, purpose: Purpose, *counters: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, purpose, *counters)``."""
    key = [int(seed), int(purpose), *(int(c) for c in counters)]
    return np.random.default_rng(np.random.SeedSequence(key))


def derive_seed(seed: int, purpose: Purpose, *counters: int) -> int:
    """A 63-bit integer seed for a sub-computation that takes its own seed."""
    key = [int(seed), int(purpose), *(int(c) for c in counters)]
    return int(np.random.SeedSequence(key).generate_state(2, np.uint64)[0] >> np.uint64(1))
