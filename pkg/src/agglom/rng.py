"""Counter-based random numbers.

Every draw is a pure function of (seed, stream id, counter, channel,
lane) through a splitmix64-style avalanche hash. No generator state means
draws vectorize over agents, populations can grow without reseeding, and
runs are bitwise reproducible across platforms.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

CH_MOVE = np.uint64(0x1)
CH_BIRTH = np.uint64(0x2)
CH_INIT = np.uint64(0x3)
CH_PERTURB = np.uint64(0x4)


def _mix(x: np.ndarray) -> np.ndarray:
    # wraparound is the point; silence the scalar overflow warnings
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(30))) * _M1).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(27))) * _M2).astype(np.uint64)
        return x ^ (x >> np.uint64(31))


def hash_bits(seed: int, stream, counter: int, channel: np.uint64, lane: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ (channel * _M2))
        h = _mix(h ^ np.asarray(stream, dtype=np.uint64))
        h = _mix(h ^ np.uint64(counter & 0xFFFFFFFFFFFFFFFF) ^ (np.uint64(lane) * _M1))
    return h


def uniforms(seed: int, stream, counter: int, channel: np.uint64, lane: int) -> np.ndarray:
    """Uniform draws in (0, 1], one per stream."""
    bits = hash_bits(seed, stream, counter, channel, lane)
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)


def normal_pairs(seed: int, stream, counter: int, channel: np.uint64 = CH_MOVE) -> np.ndarray:
    """Independent standard bivariate normals, shape (len(stream), 2)."""
    u1 = uniforms(seed, stream, counter, channel, 0)
    u2 = uniforms(seed, stream, counter, channel, 1)
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)


def normal_field(seed: int, shape: tuple[int, int], channel: np.uint64 = CH_PERTURB) -> np.ndarray:
    """Deterministic white standard-normal field of the given shape."""
    n = shape[0] * shape[1]
    ids = np.arange(n, dtype=np.uint64)
    z = normal_pairs(seed, ids, 0, channel)[:, 0]
    return z.reshape(shape)
