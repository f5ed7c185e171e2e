"""Counter-based pseudo-random primitives shared by every stochastic module.

All randomness in this package is a pure function of a 64-bit key and a
64-bit counter (splitmix64: Weyl increment + avalanche mix).  The same
construction is implemented three times -- scalar Python, vectorized numpy,
and (in _kernels) inline numba -- and the three must agree bit for bit so
that environments and walks are reproducible regardless of realization
order, chunking, or thread schedule.
"""
from __future__ import annotations

import numpy as np

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

# Domain constants keep environment, walk, and estimator streams disjoint.
DOMAIN_ENV = 0x454E56
DOMAIN_WALK = 0x57414C4B
DOMAIN_STATS = 0x53544154


def _wrap(fn):
    """Run fn with uint64 overflow warnings suppressed (wraparound intended)."""

    def inner(*args):
        with np.errstate(over="ignore"):
            return fn(*args)

    return inner


@_wrap
def mix64(z) -> np.uint64:
    z = U64(z)
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


@_wrap
def counter_bits(key, counter) -> np.uint64:
    """splitmix64 output for one (key, counter) pair; counter may be negative."""
    c = np.int64(counter).astype(U64) if not isinstance(counter, U64) else counter
    z = U64(key) + (c + U64(1)) * _GOLDEN
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


def counter_unit(key, counter) -> float:
    """Uniform double in [0, 1) for one (key, counter) pair."""
    return float(counter_bits(key, counter) >> U64(11)) * _INV53


@_wrap
def counter_bits_array(key, counters: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 over an int64/uint64 counter array."""
    c = counters.astype(U64)
    z = U64(key) + (c + U64(1)) * _GOLDEN
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


def counter_unit_array(key, counters: np.ndarray) -> np.ndarray:
    """Vectorized uniforms in [0, 1) over a counter array."""
    return (counter_bits_array(key, counters) >> U64(11)) * _INV53


def _as_u64(x) -> np.uint64:
    return U64(int(x) & 0xFFFFFFFFFFFFFFFF)


@_wrap
def child_key(key, i) -> np.uint64:
    """One absorption step of the key-derivation chain (kernel-compatible)."""
    return mix64((U64(key) + _GOLDEN) ^ mix64(_as_u64(i)))


def derive_key(master, domain, *indices) -> np.uint64:
    """Derive a stream key from a master seed, a domain tag, and indices.

    Pure function of its arguments; used to key per-environment and
    per-(environment, walk) streams so ensembles are schedule independent.
    """
    with np.errstate(over="ignore"):
        k = mix64(_as_u64(master) ^ U64(domain))
        for i in indices:
            k = child_key(k, i)
    return k
