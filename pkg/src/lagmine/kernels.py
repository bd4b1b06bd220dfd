"""Kernel backend selection: compiled extension if present, numpy otherwise.

Set ``LAGMINE_KERNELS=python`` to force the fallback (used by the
benchmark and by tests that compare the two backends).
"""

from __future__ import annotations

import os
import sys

import numpy as np

from . import _kernels_py

if sys.byteorder != "little":  # packed-word layout assumes little endian
    raise ImportError("bit kernels require a little-endian platform")

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("LAGMINE_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _compiled

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:
        pass

popcount = _impl.popcount
and_not = _impl.and_not
and_inplace = _impl.and_inplace
or_inplace = _impl.or_inplace
pattern_bits = _impl.pattern_bits
masked_moments = _impl.masked_moments

# Packing and unpacking are setup-time operations; numpy is fine for both.
set_bit_indices = _kernels_py.set_bit_indices


def n_words(n_bits: int) -> int:
    return (n_bits + 63) // 64


def pack_bits(bools: np.ndarray) -> np.ndarray:
    """Pack a boolean vector into uint64 words (tail bits zero)."""
    packed = np.packbits(np.ascontiguousarray(bools, dtype=np.uint8), bitorder="little")
    words = n_words(len(bools))
    padded = np.zeros(words * 8, dtype=np.uint8)
    padded[: len(packed)] = packed
    return padded.view(np.uint64)


def zero_words(n_bits: int) -> np.ndarray:
    return np.zeros(n_words(n_bits), dtype=np.uint64)
