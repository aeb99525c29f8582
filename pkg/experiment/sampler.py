"""Parallel projective sampling of a fixed state."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List

from analysis.clusters import Snapshot
from tensornet.mps import MpsState, canonicalize, sample_snapshots
from utils.errors import DomainError
from utils.rng import shot_stream


logger = logging.getLogger(__name__)


class ShotSampler:
    """
    Draws shot batches on a thread pool.

    Shot j at time index k always uses the stream (seed, k, j), so the
    result does not depend on the number of workers or the batch layout.
    """

    def __init__(self, seed: int, workers: int = 1, batch_size: int = 100):
        """
        Initialize the sampler.

        Args:
            seed: Base seed of the run
            workers: Worker threads; 1 samples in the calling thread
            batch_size: Shots per submitted task
        """
        if workers < 1 or batch_size < 1:
            raise DomainError(f"workers and batch_size must be >= 1, got {workers}, {batch_size}")
        self.seed = int(seed)
        self.workers = workers
        self.batch_size = batch_size
        self.shots_drawn = 0

    def _batch(self, psi: MpsState, time_index: int, start: int, stop: int) -> List[Snapshot]:
        streams = [shot_stream(self.seed, time_index, j) for j in range(start, stop)]
        return sample_snapshots(psi, streams)

    def sample(self, psi: MpsState, time_index: int, n_shots: int) -> List[Snapshot]:
        """
        Draw n_shots snapshots of psi.

        Args:
            psi: State to measure (left untouched)
            time_index: Step index of the measurement time, part of the stream key
            n_shots: Number of shots

        Returns:
            Snapshots ordered by shot index
        """
        if n_shots < 1:
            raise DomainError(f"n_shots must be >= 1, got {n_shots}")
        # right-canonical once; every batch reads the same tensors
        frozen = canonicalize(psi, 0)
        bounds = [(start, min(start + self.batch_size, n_shots))
                  for start in range(0, n_shots, self.batch_size)]
        if self.workers == 1 or len(bounds) == 1:
            batches = [self._batch(frozen, time_index, a, b) for a, b in bounds]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                futures = [pool.submit(self._batch, frozen, time_index, a, b) for a, b in bounds]
                batches = [future.result() for future in futures]
        shots = [snap for batch in batches for snap in batch]
        self.shots_drawn += len(shots)
        logger.debug("sampled %d shots at time index %d", len(shots), time_index)
        return shots

    __call__ = sample
