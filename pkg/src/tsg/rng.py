"""Seed derivation and generator construction.

Every trial gets its own generator.  The trial seed is derived from the
master seed with splitmix64 so that trials can run in any order, on any
worker, and still reproduce the same stream::

    seed_i = splitmix64(master_seed XOR ((i + 1) * 0x9E3779B97F4A7C15 mod 2**64))

The generator behind each seed is numpy's counter-based Philox4x64.
"""

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

GENERATOR_NAME = "numpy.random.Philox"
GENERATOR_VERSION = f"Philox4x64-10/numpy-{np.__version__}"


def splitmix64(x: int) -> int:
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, trial: int) -> int:
    if not 0 <= master_seed <= MASK64:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    if trial < 0:
        raise ValueError("trial index must be non-negative")
    return splitmix64(master_seed ^ (((trial + 1) * GOLDEN_GAMMA) & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return make_rng(trial_seed(master_seed, trial))
