"""Deterministic RNG stream derivation.

Every source of randomness in the simulator is a fresh ``numpy`` generator
keyed by (seed, namespace, *indices), so results never depend on the order
in which clients, rounds, or batches are processed.
"""

from __future__ import annotations

import numpy as np

# Namespace constants; never reuse a value for two purposes.
NS_DATA_POOL = 0
NS_DATA_SPLIT = 1
NS_DATA_GLOBAL = 2
NS_INIT = 10
NS_TRAIN = 11
NS_SHARPNESS = 12
NS_FINE_TUNE = 13


def rng_stream(seed: int, namespace: int, *indices: int) -> np.random.Generator:
    """Return an independent generator for (seed, namespace, indices)."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng([int(seed), int(namespace), *[int(i) for i in indices]])
