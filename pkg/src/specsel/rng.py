"""Seedable randomness with a documented seed-splitting rule.

Every sampler and experiment in this package draws from a
``numpy.random.Generator`` (PCG64) seeded with an explicit 64-bit seed.
Parallel or repeated work derives per-task seeds from a master seed via

    child_seed(master, stream) = mix64(mix64(master) ^ mix64(stream + 1))

where ``mix64`` is the splitmix64 finalizer (Steele, Lea & Flood 2014).
The rule is pure arithmetic on unsigned 64-bit integers, so a run is
reproducible regardless of scheduling order or worker count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 finalizer: an invertible mixing of a 64-bit integer."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def child_seed(master: int, stream: int) -> int:
    """Derive the 64-bit seed for stream number ``stream`` from ``master``.

    Distinct streams give statistically independent generators; the same
    (master, stream) pair always yields the same seed.
    """
    if stream < 0:
        raise ValueError("stream id must be non-negative")
    return mix64(mix64(master & _MASK64) ^ mix64((stream + 1) & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for an explicit 64-bit seed."""
    return np.random.default_rng(seed & _MASK64)


def splitmix64_stream(seed: int, count: int) -> list[int]:
    """First ``count`` outputs of a splitmix64 stream started at ``seed``.

    Reference implementation for the identical generator embedded in the
    compiled MCMC and tree-growing kernels; used by tests to pin both
    implementations to the same stream.
    """
    out = []
    state = seed & _MASK64
    for _ in range(count):
        state = (state + _GOLDEN) & _MASK64
        out.append(mix64_raw(state))
    return out


def mix64_raw(state: int) -> int:
    """The splitmix64 output function without the increment step."""
    z = state & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)
