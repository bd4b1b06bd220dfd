# cython: language_level=3
"""Compiled bit-vector kernels: the hot loop of fitness evaluation.

Same contract as ``_kernels_py``; see that module for the bit layout.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


def popcount(const uint64_t[::1] words):
    cdef Py_ssize_t i
    cdef int64_t total = 0
    with nogil:
        for i in range(words.shape[0]):
            total += __builtin_popcountll(words[i])
    return total


def and_not(const uint64_t[::1] lower, const uint64_t[::1] upper, uint64_t[::1] out):
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            out[i] = lower[i] & ~upper[i]


def and_inplace(uint64_t[::1] acc, const uint64_t[::1] words):
    cdef Py_ssize_t i
    with nogil:
        for i in range(acc.shape[0]):
            acc[i] &= words[i]


def or_inplace(uint64_t[::1] acc, const uint64_t[::1] words):
    cdef Py_ssize_t i
    with nogil:
        for i in range(acc.shape[0]):
            acc[i] |= words[i]


def pattern_bits(
    const uint64_t[:, ::1] table,
    const int64_t[::1] lo_rows,
    const int64_t[::1] hi_rows,
    uint64_t[::1] out,
):
    cdef Py_ssize_t w, k
    cdef Py_ssize_t n_words = out.shape[0]
    cdef Py_ssize_t n_preds = lo_rows.shape[0]
    cdef uint64_t acc
    with nogil:
        for w in range(n_words):
            acc = table[lo_rows[0], w] & ~table[hi_rows[0], w]
            for k in range(1, n_preds):
                acc &= table[lo_rows[k], w] & ~table[hi_rows[k], w]
            out[w] = acc


def masked_moments(const uint64_t[::1] words, const double[::1] values):
    """Welford pass over values at set bits: (count, mean, sum sq dev)."""
    cdef Py_ssize_t w
    cdef uint64_t bits
    cdef Py_ssize_t i, base
    cdef int64_t n = 0
    cdef double mean = 0.0, m2 = 0.0, x, delta
    with nogil:
        for w in range(words.shape[0]):
            bits = words[w]
            base = w * 64
            while bits != 0:
                i = base + __builtin_ctzll(bits)
                bits &= bits - 1
                x = values[i]
                n += 1
                delta = x - mean
                mean += delta / n
                m2 += delta * (x - mean)
    return n, mean, m2
