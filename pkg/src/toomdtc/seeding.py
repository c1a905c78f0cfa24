"""Reproducible per-trajectory random streams.

Streams are derived from (master_seed, point_index, trajectory_index) with
numpy's SeedSequence feeding a counter-based Philox generator, so ensembles
are bit-reproducible regardless of how trajectories are scheduled across
workers.
"""

from __future__ import annotations

import numpy as np


def spawn_rng(master_seed: int, *indices: int) -> np.random.Generator:
    ss = np.random.SeedSequence((master_seed,) + tuple(indices))
    return np.random.Generator(np.random.Philox(ss))
