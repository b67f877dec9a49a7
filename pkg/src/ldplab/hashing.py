"""Seeded 64-bit hash family for OLH encoding and HST public vectors.

A hash function is identified by its 64-bit seed. Items are mixed with a
splitmix64-style finalizer and reduced to [0, g) with a multiply-shift on
the high 32 bits, which keeps the modulo bias below 2^-32 (far under what
a chi-square uniformity test at 10^5 samples can see).

HST public vectors reuse the same family with g=2: position v holds +1
exactly when hash_items(seed, v, 2) == 0.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "mix64",
    "hash_items",
    "universal_hash",
    "support_row",
    "support_matrix",
    "hst_sign_row",
    "hst_sign_matrix",
]

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def mix64(x: np.ndarray | int) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 arrays."""
    z = np.asarray(x, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= _M1
        z ^= z >> np.uint64(27)
        z *= _M2
        z ^= z >> np.uint64(31)
    return z


def hash_items(seeds, items, g: int) -> np.ndarray:
    """Evaluate h_seed(item) in [0, g) with broadcasting.

    seeds and items may be scalars or arrays; items are 1-based ids.
    """
    s = np.asarray(seeds, dtype=np.uint64)
    v = np.asarray(items, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = mix64(s ^ mix64(v * _GOLDEN + _GOLDEN))
    # multiply-shift reduction on the high 32 bits
    hi = z >> np.uint64(32)
    return ((hi * np.uint64(g)) >> np.uint64(32)).astype(np.int64)


def universal_hash(hash_id: int, v: int, g: int) -> int:
    """Public hash: maps item v to a value in [1, g] under seed hash_id."""
    if g < 2:
        raise ValueError("g must be >= 2")
    return int(hash_items(np.uint64(hash_id), np.uint64(v), g)) + 1


def support_row(seed: int, value0: int, d: int, g: int) -> np.ndarray:
    """Boolean vector over items 1..d: True where h_seed(item) == value0."""
    return hash_items(np.uint64(seed), np.arange(1, d + 1, dtype=np.uint64), g) == value0


def support_matrix(
    seeds: np.ndarray, values0: np.ndarray, d: int, g: int, chunk: int = 4096
) -> np.ndarray:
    """n x d support booleans for OLH-style reports, chunked over users.

    values0 are the reported hash values in [0, g). Duplicate seeds are
    detected and expanded once (MGA reuses one seed for every fake user).
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    values0 = np.asarray(values0, dtype=np.int64)
    n = seeds.shape[0]
    out = np.empty((n, d), dtype=bool)
    uniq, inverse = np.unique(seeds, return_inverse=True)
    items = np.arange(1, d + 1, dtype=np.uint64)
    if uniq.shape[0] <= max(64, n // 16):
        table = np.empty((uniq.shape[0], d), dtype=np.int64)
        for i0 in range(0, uniq.shape[0], chunk):
            sl = slice(i0, min(i0 + chunk, uniq.shape[0]))
            table[sl] = hash_items(uniq[sl, None], items[None, :], g)
        for i0 in range(0, n, chunk):
            sl = slice(i0, min(i0 + chunk, n))
            out[sl] = table[inverse[sl]] == values0[sl, None]
        return out
    for i0 in range(0, n, chunk):
        sl = slice(i0, min(i0 + chunk, n))
        h = hash_items(seeds[sl, None], items[None, :], g)
        out[sl] = h == values0[sl, None]
    return out


def hst_sign_row(seed: int, d: int) -> np.ndarray:
    """Expand a public vector seed to its +/-1 entries (int8, length d)."""
    plus = support_row(seed, 0, d, 2)
    return np.where(plus, np.int8(1), np.int8(-1))


def hst_sign_matrix(seeds: np.ndarray, d: int, chunk: int = 4096) -> np.ndarray:
    """n x d matrix of +/-1 public vectors expanded from seeds."""
    plus = support_matrix(seeds, np.zeros(len(seeds), dtype=np.int64), d, 2, chunk)
    return np.where(plus, np.int8(1), np.int8(-1))
