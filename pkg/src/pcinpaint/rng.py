"""Seeded random streams.

Every stochastic operation in the package draws from a PCG64 generator
built here from an explicit 64-bit seed plus optional integer stream
tags. There is no global RNG state anywhere; identical (seed, tags)
always yields an identical stream.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for the stream identified by (seed, *stream)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream))))
