"""Seeded, splittable randomness for reproducible experiments.

All random draws in the package flow through make_rng / split_seed so a
single integer seed pins every weight matrix, split, and patch position.
The generator algorithm is recorded in model files under PRNG_ID.
"""

from __future__ import annotations

import numpy as np

# Recorded in model headers; bump if the generator algorithm ever changes.
PRNG_ID = "numpy-pcg64"


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for the given seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split_seed(seed: int, count: int) -> list[int]:
    """Derive `count` independent child seeds from one parent seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]
