"""Counter-based uniform generator.

Every draw is a pure function of ``(key, counter)``: no hidden state, so an
episode's randomness does not depend on which worker generates it or in what
order. The mixer is the SplitMix64 finalizer applied in a chain over the key
words; uniforms take the top 53 bits.

The scalar functions are compiled with numba when available. The ``*_array``
variants are the numpy equivalents and produce identical bits.
"""

import numpy as np

from ._jit import NUMBA_AVAILABLE, njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1

# stream tags keep unrelated consumers of one seed apart
STREAM_EPISODE = 1
STREAM_SIM_MDP = 2
STREAM_DERIVE = 3
STREAM_HARD = 4


@njit(inline="always")
def mix64(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(inline="always")
def uniform(key, stream, counter):
    """Uniform on [0, 1) for one ``(key, stream, counter)`` triple (all uint64)."""
    h = mix64(mix64(mix64(key) ^ stream) ^ counter)
    return np.float64(h >> _S11) * _INV53


def mix64_array(z):
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def uniform_array(key, stream, counter):
    """Vectorised :func:`uniform`; ``key``, ``stream`` and ``counter`` broadcast."""
    key = np.asarray(key, dtype=np.uint64)
    stream = np.asarray(stream, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    h = mix64_array(mix64_array(mix64_array(key) ^ stream) ^ counter)
    return (h >> _S11).astype(np.float64) * _INV53


if not NUMBA_AVAILABLE:
    # plain-Python scalars would warn on the intended uint64 wraparound
    mix64 = mix64_array  # noqa: F811


def as_key(seed):
    """Fold an arbitrary Python integer into a 64-bit key."""
    return np.uint64(int(seed) & MASK64)


def derive_seed(seed, *words):
    """Deterministically derive a child 64-bit seed from ``seed`` and integer words."""
    h = np.asarray(as_key(seed), dtype=np.uint64)
    h = mix64_array(h ^ np.uint64(STREAM_DERIVE))
    for w in words:
        h = mix64_array(h ^ np.uint64(int(w) & MASK64))
    return int(h)
