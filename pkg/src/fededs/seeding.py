"""Deterministic seed derivation.

Every random decision in a simulation run is drawn from a Generator whose
seed is derived from the run's base seed plus a tag path, e.g.
``derive_seed(base, "stoch", k)`` for client k's stochastic layer. This
keeps runs reproducible from a single integer and makes client work
independent of execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = 2**64


def derive_seed(base_seed: int, *tags: object) -> int:
    """Derive a 64-bit seed from a base seed and a tag path.

    Uses BLAKE2b over a canonical encoding, so the result is stable across
    platforms and Python processes (unlike built-in ``hash``).
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(base_seed) % _U64).encode())
    for tag in tags:
        h.update(b"\x1f")
        h.update(repr(tag).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(base_seed: int, *tags: object) -> np.random.Generator:
    """Generator seeded by ``derive_seed(base_seed, *tags)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(base_seed, *tags)))
