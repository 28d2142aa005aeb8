"""Deterministic seed derivation.

Every stochastic component (patient sampling, bootstrap resamples, GA runs,
experiment repetitions) draws from a stream derived with :func:`mix`, so
results are identical regardless of evaluation order or worker count.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# splitmix64 constants (Steele, Lea & Flood).
GAMMA = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB


def mix(seed: int, index: int) -> int:
    """Derive an independent 64-bit child seed from (seed, index).

    splitmix64 finalizer applied to ``seed`` advanced by ``index + 1`` gammas;
    the +1 keeps mix(s, 0) != finalize(s) for any other use of ``s``.
    """
    z = (seed + GAMMA * (index + 1)) & MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def generator(seed: int) -> np.random.Generator:
    """Seeded numpy generator for one derived stream."""
    return np.random.Generator(np.random.PCG64(seed & MASK64))


def splitmix64_block(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the splitmix64 stream for ``seed``.

    Counter-based, so a block can be produced in one vectorized shot; the
    compiled forest kernel steps the same stream one call at a time.
    """
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed) + np.uint64(GAMMA) * idx
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_B)
    return z ^ (z >> np.uint64(31))
