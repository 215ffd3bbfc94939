"""Counter-based deterministic randomness.

Every random decision in the harness is addressed as (stream key, draw index)
instead of consuming sequential generator state. The value at an address is a
pure function of the address, so operator output is independent of iteration
order, chunking, and worker count.

The key is a 64-bit hash of the canonical context tuple
(axis, dataset, op, severity_index, seed); the per-index generator is random
access into the splitmix64 sequence seeded at that key. Both the FNV-1a key
hash and the splitmix64 finalizer are fixed constants of the file format:
changing them invalidates every recorded provenance sidecar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x00000100000001B3

# splitmix64 constants (golden-ratio increment + finalizer multipliers)
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U = np.uint64


@dataclass(frozen=True)
class StreamKey:
    """64-bit address of one deterministic random stream."""

    key: int

    def __post_init__(self):
        if not 0 <= self.key <= _MASK64:
            raise ValueError("stream key out of 64-bit range")


def _splitmix64(z: int) -> int:
    z = z & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_key(axis: str, dataset: str, op: str, severity_index: int, seed: int) -> StreamKey:
    """Hash the canonical encoding of a context tuple into a StreamKey.

    Encoding: the five fields joined with 0x1F separators, UTF-8; hashed with
    64-bit FNV-1a and passed through the splitmix64 finalizer.
    """
    text = "\x1f".join([axis, dataset, op, str(int(severity_index)), str(int(seed))])
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return StreamKey(_splitmix64(h))


def _raw64(key: StreamKey, index) -> np.ndarray:
    """splitmix64 output at position index+1 of the sequence seeded at key."""
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):  # mod-2**64 wraparound is the algorithm
        z = _U(key.key) + (idx + _U(1)) * _U(_GAMMA)
        z = (z ^ (z >> _U(30))) * _U(_MIX1)
        z = (z ^ (z >> _U(27))) * _U(_MIX2)
        return z ^ (z >> _U(31))


def uniform(key: StreamKey, index):
    """Uniform real in [0, 1) at (key, index).

    Accepts a scalar index or an integer array; returns a float or a float64
    array of the same shape.
    """
    bits = _raw64(key, index) >> _U(11)  # top 53 bits
    out = bits.astype(np.float64) * (1.0 / (1 << 53))
    if np.ndim(index) == 0:
        return float(out)
    return out


def gaussian(key: StreamKey, index):
    """Standard normal variate at (key, index) via trigonometric Box-Muller.

    Consumes the two uniforms at sub-indices (2*index, 2*index + 1), so
    distinct indices never share raw draws.
    """
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        sub = idx * _U(2)
        u1 = uniform(key, sub)
        u2 = uniform(key, sub + _U(1))
    out = np.sqrt(-2.0 * np.log1p(-np.asarray(u1))) * np.cos(2.0 * np.pi * np.asarray(u2))
    if np.ndim(index) == 0:
        return float(out)
    return out


def permutation(key: StreamKey, n: int) -> np.ndarray:
    """Deterministic permutation of range(n): argsort of the first n uniforms.

    Ties between 53-bit uniforms are broken by position, which keeps the
    result a pure function of (key, n).
    """
    if n == 0:
        return np.empty(0, dtype=np.int64)
    u = uniform(key, np.arange(n, dtype=np.uint64))
    return np.argsort(u, kind="stable").astype(np.int64)
