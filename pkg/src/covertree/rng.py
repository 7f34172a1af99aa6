"""Counter-based random streams.

Every sampler draws from a stream keyed by (master seed, tag, n, replica),
so any subset of replicas can be regenerated independently and results do
not depend on worker count or scheduling.  numpy's Philox generator is the
counter-based engine behind `stream`; the jitted kernels use xorshift128+
states derived from the same key material.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    # Finalizer of the splitmix64 sequence; vectorized over uint64 arrays.
    with np.errstate(over="ignore"):
        z = (x + _GOLDEN).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _tag_hash(tag: str) -> np.uint64:
    h = np.uint64(0xCBF29CE484222325)
    with np.errstate(over="ignore"):
        for b in tag.encode():
            h = np.uint64(h ^ np.uint64(b)) * np.uint64(0x100000001B3)
    return h


def stream_keys(master_seed: int, tag: str, n: int, replicas: np.ndarray) -> np.ndarray:
    """Per-replica 2-word keys, shape (len(replicas), 2), dtype uint64."""
    reps = np.asarray(replicas, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = _splitmix64(np.uint64(master_seed) ^ _tag_hash(tag))
        base = _splitmix64(base + np.uint64(n) * _GOLDEN)
        w0 = _splitmix64(base + reps * _GOLDEN)
        w1 = _splitmix64(w0 + _GOLDEN)
    keys = np.stack([w0, w1], axis=1)
    # xorshift128+ forbids the all-zero state (probability 2^-128, but cheap).
    zero = (keys == 0).all(axis=1)
    keys[zero, 0] = _GOLDEN
    return keys


def stream_key(master_seed: int, tag: str, n: int, replica: int) -> np.ndarray:
    """Single 2-word key for one replica."""
    return stream_keys(master_seed, tag, n, np.array([replica]))[0]


def stream(master_seed: int, tag: str, n: int = 0, replica: int = 0) -> np.random.Generator:
    """Philox generator for the (master seed, tag, n, replica) stream."""
    key = stream_key(master_seed, tag, n, replica)
    return np.random.Generator(np.random.Philox(key=key))
