"""Counter-based random streams.

Every shot gets its own Philox generator keyed by (seed, time index, shot
index), so a batch can be split across workers in any order and still
produce the same snapshots.
"""

from typing import List

import numpy as np


def shot_stream(seed: int, time_index: int, shot: int) -> np.random.Generator:
    """Generator for one measurement shot."""
    sequence = np.random.SeedSequence([int(seed), int(time_index), int(shot)])
    return np.random.Generator(np.random.Philox(sequence))


def shot_streams(seed: int, time_index: int, n_shots: int) -> List[np.random.Generator]:
    """Generators for shots 0..n_shots-1 at one scheduled time."""
    return [shot_stream(seed, time_index, shot) for shot in range(n_shots)]


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Generator for a named purpose (random initial states, DMRG guesses)."""
    salt = [ord(ch) for ch in name]
    sequence = np.random.SeedSequence([int(seed), *salt])
    return np.random.Generator(np.random.Philox(sequence))
