"""Deterministic RNG plumbing.

Every random stream is a counter-based Philox generator keyed by a
SplitMix64-style hash of (seed, stream tags). Derived streams therefore
depend only on their tags, never on execution order, so replicates and
trials can run in parallel and still reproduce bit-identically.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream tags used across the package.
STREAM_MU = 1
STREAM_TAPE1 = 2
STREAM_TAPE2 = 3


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix64(*parts: int) -> int:
    """Hash an arbitrary tag sequence into one 64-bit stream key."""
    h = 0
    for p in parts:
        h = _splitmix64((h ^ (int(p) & _MASK64)) & _MASK64)
    return h


def make_generator(*parts: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by the tags."""
    return np.random.Generator(np.random.Philox(key=mix64(*parts)))


def replicate_seed(master_seed: int, replicate: int) -> int:
    """Seed for replicate ``replicate`` of a run keyed by ``master_seed``."""
    return mix64(master_seed, replicate)
