"""SipHash-2-4.

Two entry points: :func:`siphash24` takes an arbitrary byte string and is
the reference path, :func:`siphash24_words` evaluates many single-word
(8-byte) messages under one key with numpy. The hop function only ever
hashes one 8-byte word, so the vectorized path is specialized for that.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_C0 = 0x736F6D6570736575
_C1 = 0x646F72616E646F6D
_C2 = 0x6C7967656E657261
_C3 = 0x7465646279746573


def _rotl(x: int, b: int) -> int:
    return ((x << b) | (x >> (64 - b))) & MASK64


def _sipround(v0: int, v1: int, v2: int, v3: int) -> tuple[int, int, int, int]:
    v0 = (v0 + v1) & MASK64
    v1 = _rotl(v1, 13) ^ v0
    v0 = _rotl(v0, 32)
    v2 = (v2 + v3) & MASK64
    v3 = _rotl(v3, 16) ^ v2
    v0 = (v0 + v3) & MASK64
    v3 = _rotl(v3, 21) ^ v0
    v2 = (v2 + v1) & MASK64
    v1 = _rotl(v1, 17) ^ v2
    v2 = _rotl(v2, 32)
    return v0, v1, v2, v3


def split_key(key: bytes) -> tuple[int, int]:
    """Return the two little-endian 64-bit halves of a 16-byte key."""
    if len(key) != 16:
        raise ValueError(f"SipHash key must be 16 bytes, got {len(key)}")
    return int.from_bytes(key[:8], "little"), int.from_bytes(key[8:], "little")


def siphash24(key: bytes, data: bytes) -> int:
    """SipHash-2-4 of ``data`` under ``key``, as an unsigned 64-bit int.

    The integer is the little-endian reading of the 8 output bytes, so
    ``siphash24(k, m).to_bytes(8, "little")`` is the reference digest.
    """
    k0, k1 = split_key(key)
    v0, v1, v2, v3 = _C0 ^ k0, _C1 ^ k1, _C2 ^ k0, _C3 ^ k1

    n = len(data)
    whole = n - n % 8
    for off in range(0, whole, 8):
        m = int.from_bytes(data[off:off + 8], "little")
        v3 ^= m
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0 ^= m

    b = ((n & 0xFF) << 56) | int.from_bytes(data[whole:], "little")
    v3 ^= b
    v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    v0 ^= b

    v2 ^= 0xFF
    for _ in range(4):
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    return v0 ^ v1 ^ v2 ^ v3


def siphash24_word(k0: int, k1: int, m: int) -> int:
    """Unrolled :func:`siphash24` for one 8-byte message given as an int.

    Takes the pre-split key halves; this sits on the per-packet path.
    """
    v0, v1, v2, v3 = _C0 ^ k0, _C1 ^ k1, _C2 ^ k0, (_C3 ^ k1) ^ m
    b = 8 << 56
    for i in range(8):
        if i == 2:
            v0 ^= m
            v3 ^= b
        elif i == 4:
            v0 ^= b
            v2 ^= 0xFF
        v0 = (v0 + v1) & MASK64
        v1 = ((v1 << 13) | (v1 >> 51)) & MASK64 ^ v0
        v0 = ((v0 << 32) | (v0 >> 32)) & MASK64
        v2 = (v2 + v3) & MASK64
        v3 = ((v3 << 16) | (v3 >> 48)) & MASK64 ^ v2
        v0 = (v0 + v3) & MASK64
        v3 = ((v3 << 21) | (v3 >> 43)) & MASK64 ^ v0
        v2 = (v2 + v1) & MASK64
        v1 = ((v1 << 17) | (v1 >> 47)) & MASK64 ^ v2
        v2 = ((v2 << 32) | (v2 >> 32)) & MASK64
    return v0 ^ v1 ^ v2 ^ v3


# -- vectorized single-word variant ------------------------------------------

_U = np.uint64


def _rotl_np(x: np.ndarray, b: int) -> np.ndarray:
    return (x << _U(b)) | (x >> _U(64 - b))


def _sipround_np(v0, v1, v2, v3):
    v0 = v0 + v1
    v1 = _rotl_np(v1, 13) ^ v0
    v0 = _rotl_np(v0, 32)
    v2 = v2 + v3
    v3 = _rotl_np(v3, 16) ^ v2
    v0 = v0 + v3
    v3 = _rotl_np(v3, 21) ^ v0
    v2 = v2 + v1
    v1 = _rotl_np(v1, 17) ^ v2
    v2 = _rotl_np(v2, 32)
    return v0, v1, v2, v3


def siphash24_words(key: bytes, words: np.ndarray) -> np.ndarray:
    """SipHash-2-4 of each 64-bit word in ``words`` taken as an 8-byte
    little-endian message. Returns a uint64 array of the same shape."""
    k0, k1 = split_key(key)
    return siphash24_words_keyed(np.uint64(k0), np.uint64(k1), words)


def siphash24_words_keyed(k0: np.ndarray, k1: np.ndarray, words: np.ndarray) -> np.ndarray:
    """Like :func:`siphash24_words` with per-element key halves; ``k0``,
    ``k1`` and ``words`` broadcast against each other."""
    m = np.asarray(words, dtype=np.uint64)
    k0 = np.asarray(k0, dtype=np.uint64)
    k1 = np.asarray(k1, dtype=np.uint64)
    shape = np.broadcast_shapes(m.shape, k0.shape, k1.shape)
    v0 = np.broadcast_to(k0 ^ _U(_C0), shape).copy()
    v1 = np.broadcast_to(k1 ^ _U(_C1), shape).copy()
    v2 = np.broadcast_to(k0 ^ _U(_C2), shape).copy()
    v3 = np.broadcast_to(k1 ^ _U(_C3), shape) ^ m

    v0, v1, v2, v3 = _sipround_np(v0, v1, v2, v3)
    v0, v1, v2, v3 = _sipround_np(v0, v1, v2, v3)
    v0 = v0 ^ m

    b = _U(8 << 56)
    v3 = v3 ^ b
    v0, v1, v2, v3 = _sipround_np(v0, v1, v2, v3)
    v0, v1, v2, v3 = _sipround_np(v0, v1, v2, v3)
    v0 = v0 ^ b

    v2 = v2 ^ _U(0xFF)
    for _ in range(4):
        v0, v1, v2, v3 = _sipround_np(v0, v1, v2, v3)
    return v0 ^ v1 ^ v2 ^ v3
