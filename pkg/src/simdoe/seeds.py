"""Counter-based 64-bit seed derivation.

All randomness in the package flows through two primitives built on the
SplitMix64 finalizer:

  derive_seed(master, *indices)   independent child seed for a labelled task
  uniform_stream(seed, start, n)  the seed's uniforms at counters start..start+n-1

Both are pure functions of their arguments, so results never depend on how
work is scheduled across processes.  uniform_stream(seed, k, 1)[0] equals
element k of the SplitMix64 sequence started at derive-time state, which is
what makes per-pair / per-run draws replayable in isolation.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _fmix64(z: int) -> int:
    """SplitMix64 finalizer: bijective avalanche over 64-bit words."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * _MIX1) & _MASK64
    z ^= z >> 27
    z = (z * _MIX2) & _MASK64
    z ^= z >> 31
    return z


def derive_seed(master: int, *indices: int) -> int:
    """Mix a master seed with integer indices into an independent seed.

    Each index is absorbed sequentially; distinct index tuples of the same
    shape yield distinct seeds (each absorption step is injective in the
    index for a fixed running state).
    """
    h = _fmix64(master)
    for ix in indices:
        h = _fmix64((h + _GOLDEN * ((ix & _MASK64) + 1)) & _MASK64)
    return h


def uniform(seed: int, counter: int) -> float:
    """Uniform in [0, 1) at a given counter position of the seed's stream."""
    z = _fmix64((_fmix64(seed) + _GOLDEN * ((counter & _MASK64) + 1)) & _MASK64)
    return (z >> 11) * 2.0 ** -53


def _fmix64_np(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z.copy()
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
    return z


def uniform_stream(seed: int, start: int, count: int) -> np.ndarray:
    """Vectorized uniform(seed, k) for k = start .. start+count-1."""
    base = np.uint64(_fmix64(seed))
    idx = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _fmix64_np(base + np.uint64(_GOLDEN) * (idx + np.uint64(1)))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def derive_seed_array(master: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized derive_seed(master, i) over a single index level."""
    base = np.uint64(_fmix64(master))
    idx = indices.astype(np.uint64)
    with np.errstate(over="ignore"):
        return _fmix64_np(base + np.uint64(_GOLDEN) * (idx + np.uint64(1)))


def uniform_block(seeds: np.ndarray, count: int) -> np.ndarray:
    """Row s of the result equals uniform_stream(seeds[s], 0, count)."""
    base = _fmix64_np(seeds.astype(np.uint64))[:, None]
    idx = np.arange(count, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        z = _fmix64_np(base + np.uint64(_GOLDEN) * (idx + np.uint64(1)))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
