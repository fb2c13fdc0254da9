"""Deterministic RNG stream derivation.

Every Monte-Carlo consumer takes a ``numpy.random.Generator``. Parallel work
derives child streams from ``(master_seed, *keys)`` so results never depend on
worker count or scheduling order.
"""
import numpy as np


def stream(seed, *keys):
    """Return a generator for the stream identified by ``seed`` and ``keys``."""
    keys = tuple(int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=keys))
