"""Seeded, splittable random streams.

Every stochastic routine takes either an integer seed or a ``Generator``.
Streams are derived from ``(seed, *names)`` so that independent parts of a
run (projection, initial design, noise, ...) never share state.
"""

from __future__ import annotations

import zlib

import numpy as np



def _name_key(name) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name) & 0xFFFFFFFF
    return zlib.crc32(str(name).encode("utf-8"))


def stream(seed: int, *names) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by ``seed`` and stream names."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_name_key(n) for n in names]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def as_generator(seed, *names) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = 0
    return stream(int(seed), *names)


def derive_seed(seed: int, *names) -> int:
    """A 63-bit integer seed for a named sub-stream."""
    rng = stream(seed, *names)
    return int(rng.integers(0, 2**63 - 1))
