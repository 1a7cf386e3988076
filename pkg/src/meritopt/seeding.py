"""Counter-based seed derivation.

Every random draw in a campaign is produced by a generator seeded from the
campaign root seed plus an integer path (phase, iteration, repetition, ...).
No mutable RNG state is ever shared between subsystems, so any subsystem can
be re-run in isolation and a resumed campaign replays identically.
"""

from __future__ import annotations

import numpy as np

# Phase constants for seed paths. Keep stable: persisted runs depend on them.
PHASE_INITIAL_SAMPLE = 0
PHASE_TUNING = 1
PHASE_ITERATION = 2
PHASE_DIAGNOSTICS = 3
PHASE_EVALUATION = 4


def child_seed(root: int, *path: int) -> int:
    """Derive a child seed from ``root`` and an integer path.

    Uses numpy's SeedSequence spawn-key mechanism, which is documented as a
    stable hash. Identical (root, path) always yields the identical seed.
    """
    ss = np.random.SeedSequence(root, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint32)[0])


def rng_for(root: int, *path: int) -> np.random.Generator:
    """Generator seeded by ``child_seed(root, *path)``."""
    return np.random.default_rng(child_seed(root, *path))
