"""Derivation of independent, reproducible random streams.

Every random decision in a run is drawn from a stream derived from one
master seed plus a structural path (stream tag, indices).  Streams are
independent of execution order, so epochs and sweep points can run in any
schedule (or in parallel) without changing results.
"""

from __future__ import annotations

import numpy as np

# Stream tags.  Each (tag, *indices) path names exactly one stream.
SYBIL_STREAM = 0
VICTIM_STREAM = 1
EPOCH_STREAM = 2
FRACTION_STREAM = 3
TOPOLOGY_SEED_STREAM = 4
TOPOLOGY_ATTEMPT_STREAM = 5


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream named by ``(seed, *path)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def subseed(seed: int, *path: int) -> int:
    """64-bit integer seed derived from ``(seed, *path)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    state = np.random.SeedSequence(seed, spawn_key=tuple(path)).generate_state(1, dtype=np.uint64)
    return int(state[0])
