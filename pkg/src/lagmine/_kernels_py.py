"""Pure numpy implementations of the bit-vector kernels.

Used when the compiled extension is unavailable (or forced via
``LAGMINE_KERNELS=python``).  Semantics must match ``_kernels.pyx``
bit-for-bit on counts and to float64 round-off on moments.

Bit vectors are little-endian packed uint64 words: logical bit ``i`` lives
in word ``i // 64`` at bit position ``i % 64``.  Tail bits past the logical
length are always zero.
"""

from __future__ import annotations

import numpy as np

if hasattr(np, "bitwise_count"):

    def popcount(words: np.ndarray) -> int:
        return int(np.bitwise_count(words).sum())

else:  # numpy < 2.0
    _POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

    def popcount(words: np.ndarray) -> int:
        return int(_POP8[words.view(np.uint8)].sum())


def and_not(lower: np.ndarray, upper: np.ndarray, out: np.ndarray) -> None:
    """out = lower & ~upper (the half-open range check on bit vectors)."""
    np.bitwise_and(lower, np.bitwise_not(upper), out=out)


def and_inplace(acc: np.ndarray, words: np.ndarray) -> None:
    np.bitwise_and(acc, words, out=acc)


def or_inplace(acc: np.ndarray, words: np.ndarray) -> None:
    np.bitwise_or(acc, words, out=acc)


def pattern_bits(
    table: np.ndarray,
    lo_rows: np.ndarray,
    hi_rows: np.ndarray,
    out: np.ndarray,
) -> None:
    """AND over predicates of (table[lo] & ~table[hi]), written into out."""
    np.bitwise_and(table[lo_rows[0]], np.bitwise_not(table[hi_rows[0]]), out=out)
    for k in range(1, len(lo_rows)):
        out &= table[lo_rows[k]] & ~table[hi_rows[k]]


def _mask_of(words: np.ndarray, n_bits: int) -> np.ndarray:
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")
    return bits[:n_bits].astype(bool)


def masked_moments(words: np.ndarray, values: np.ndarray) -> tuple[int, float, float]:
    """Count, mean and sum of squared deviations of values at set bits."""
    selected = values[_mask_of(words, len(values))]
    n = selected.size
    if n == 0:
        return 0, 0.0, 0.0
    mean = float(selected.mean())
    m2 = float(np.sum((selected - mean) ** 2))
    return int(n), mean, m2


def set_bit_indices(words: np.ndarray, n_bits: int) -> np.ndarray:
    return np.flatnonzero(_mask_of(words, n_bits))
