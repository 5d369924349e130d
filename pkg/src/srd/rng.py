"""Counter-based deterministic random numbers.

Every value here is a pure function of ``(seed, position)``: word ``i`` of a
stream is ``mix64(seed + (i + 1) * GOLDEN)`` where ``mix64`` is the SplitMix64
finaliser and ``GOLDEN`` is 2**64 divided by the golden ratio, rounded to odd.
There is no hidden generator state, so any slice of a stream can be produced
independently of the rest, and the byte stream is identical on every platform
(and in any language with 64-bit unsigned arithmetic).

Derived values keep the same property: uniform doubles take the top 53 bits of
a word, Gaussian deviates come from Box-Muller pairs (no ziggurat tables, no
rejection loops), shuffles are plain Fisher-Yates over the word stream, and
substreams are decorrelated with one extra mix round. Strings are turned into
substream keys with FNV-1a 64.
"""

from __future__ import annotations

import numpy as np

_M64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_MUL2 = np.uint64(0x94D049BB133111EB)
# arbitrary odd constant (fractional bits of sqrt 2) separating the key and
# seed domains in substream derivation
_KEY_SALT = 0x6A09E667F3BCC909


def mix64(words: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser applied elementwise to a uint64 array."""
    x = words.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _MIX_MUL1
    x ^= x >> np.uint64(27)
    x *= _MIX_MUL2
    x ^= x >> np.uint64(31)
    return x


def _mix_int(value: int) -> int:
    # scalar helper; numpy scalar uint64 arithmetic warns on wrap, arrays do not
    return int(mix64(np.array([value & _M64], dtype=np.uint64))[0])


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 encoding of ``text``."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _M64
    return h


def raw_words(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Words ``start .. start+count-1`` of the uint64 stream for ``seed``."""
    if count < 0 or start < 0:
        raise ValueError("count and start must be non-negative")
    index = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return mix64(np.uint64(seed & _M64) + index * GOLDEN)


def uniforms(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Doubles in [0, 1) with 53-bit resolution, one per stream word."""
    return (raw_words(seed, count, start) >> np.uint64(11)) * 2.0**-53


def normals(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Standard normal deviates via Box-Muller on consecutive uniform pairs.

    Consumes ``2 * ceil(count / 2)`` stream positions beginning at ``start``,
    so disjoint blocks of a stream yield independent deviates.
    """
    pairs = (count + 1) // 2
    u = uniforms(seed, 2 * pairs, start)
    radial = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))  # 1-u keeps the log finite
    angle = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = radial * np.cos(angle)
    out[1::2] = radial * np.sin(angle)
    return out[:count]


def substream(seed: int, key: int | str) -> int:
    """Derive an independent child seed for ``key`` under ``seed``.

    Distinct keys map to distinct child seeds for a fixed parent because the
    mix round is a bijection.
    """
    if isinstance(key, str):
        key = fnv1a64(key)
    return _mix_int((seed & _M64) ^ _mix_int((key & _M64) ^ _KEY_SALT))


def permutation(seed: int, n: int) -> np.ndarray:
    """Fisher-Yates permutation of ``range(n)`` driven by the word stream."""
    perm = np.arange(n)
    if n < 2:
        return perm
    words = raw_words(seed, n - 1)
    for i in range(n - 1, 0, -1):
        j = int(words[n - 1 - i]) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm
