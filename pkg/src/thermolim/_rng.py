"""Counter-based random numbers.

Every random value is a pure function of (seed, stream, site coordinates).
The mixer is the SplitMix64 finalizer:

    z += 0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z = z ^ (z >> 31)

all arithmetic modulo 2**64. Coordinates are folded in one at a time, so the
value at a site does not depend on which other sites are queried.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(x) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix_seed(master: int, index: int) -> int:
    """Derive a child seed from a master seed and a task index."""
    a = np.array([master & _MASK], dtype=np.uint64)
    b = np.array([index & _MASK], dtype=np.uint64)
    return int(mix64(mix64(a) ^ b)[0])


def _as_u64(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        return arr
    return arr.astype(np.int64).view(np.uint64)


def site_hash(seed, stream: int, coords: np.ndarray) -> np.ndarray:
    """Hash (seed, stream, coords) to uint64.

    ``coords`` has shape (n, dim). ``seed`` is an int or an integer array that
    broadcasts against the leading axis, e.g. shape (T, 1) gives a (T, n) result.
    """
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    if isinstance(seed, (int, np.integer)):
        seed_arr = np.uint64(int(seed) & _MASK)
    else:
        seed_arr = _as_u64(seed)
    h = mix64(mix64(seed_arr) ^ mix64(np.uint64(stream & _MASK)))
    h = np.broadcast_to(h, np.broadcast_shapes(np.shape(h), coords.shape[:1])).copy()
    for k in range(coords.shape[1]):
        h = mix64(h ^ _as_u64(coords[:, k]))
    return h


def site_uniform(seed, stream: int, coords: np.ndarray) -> np.ndarray:
    """Uniform doubles in [0, 1) keyed by (seed, stream, site)."""
    h = site_hash(seed, stream, coords)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
