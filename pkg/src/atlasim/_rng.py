"""Seed derivation.

Every random stream is a ``numpy.random.Generator`` seeded from
``SeedSequence(master_seed, spawn_key=...)``, so streams are independent,
reproducible and do not depend on scheduling order.
"""
import hashlib

import numpy as np


def _key_part(part):
    if isinstance(part, (int, np.integer)):
        return int(part)
    digest = hashlib.sha256(str(part).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def derive_rng(seed, *keys):
    """Return a Generator for the stream labelled ``keys`` under ``seed``.

    Keys may be ints or strings (strings are hashed to 32-bit labels).
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("cannot derive labelled streams from a Generator")
        return seed
    ss = np.random.SeedSequence(
        0 if seed is None else int(seed), spawn_key=tuple(_key_part(k) for k in keys)
    )
    return np.random.default_rng(ss)


def check_random_state(random_state):
    """Accept None, an int seed, or a Generator; return a Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)
