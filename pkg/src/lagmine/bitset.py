"""Precomputed inequality-check tables and bitwise pattern evaluation.

For every (rpc, threshold) pair with the threshold drawn from that RPC's
eligible values, two bit vectors are precomputed: one over positive requests
(latency above the SLO) and one over negatives.  Bit ``i`` of a vector is set
iff the i-th request of that polarity has execution time ``>= threshold``.
A predicate ``[e_min, e_max)`` then evaluates as ``lower & ~upper``, patterns
as AND across predicates, pattern sets as OR across patterns, and true/false
positive counts fall out of popcounts.

Tables are immutable after :func:`precompute` and safe to share across
fitness workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import kernels
from .errors import StaleTablesError
from .model import Dataset, Pattern, PatternSet, Predicate


@dataclass(frozen=True, eq=False)
class SetBits:
    """Evaluation result: hit bits over positives and over negatives."""

    pos: np.ndarray  # uint64 words, length covers n_pos bits
    neg: np.ndarray
    n_pos: int
    n_neg: int


@dataclass(frozen=True, eq=False)
class BitTables:
    """Lookup tables of inequality-check bit vectors, one row per key."""

    pos_table: np.ndarray  # (n_keys, pos_words) uint64
    neg_table: np.ndarray  # (n_keys, neg_words) uint64
    rows: dict  # (rpc, threshold) -> row index
    pos_order: np.ndarray  # request indices fixing positive bit positions
    neg_order: np.ndarray
    n_pos: int
    n_neg: int

    def row_for(self, rpc: int, threshold: float) -> int:
        try:
            return self.rows[(rpc, threshold)]
        except KeyError:
            raise StaleTablesError(
                f"no precomputed check for rpc {rpc} at threshold {threshold!r}"
            ) from None


def _threshold_values(eligible_entry) -> np.ndarray:
    values = getattr(eligible_entry, "values", eligible_entry)
    return np.asarray(values, dtype=np.float64)


def precompute(dataset: Dataset, eligible: Mapping[int, object]) -> BitTables:
    """Build one bit vector per (rpc, threshold) per polarity."""
    pos_order = dataset.pos_indices()
    neg_order = dataset.neg_indices()
    n_pos, n_neg = len(pos_order), len(neg_order)

    keys: list[tuple[int, float]] = []
    for rpc in sorted(eligible):
        for t in _threshold_values(eligible[rpc]):
            keys.append((rpc, float(t)))

    pos_table = np.zeros((len(keys), kernels.n_words(n_pos)), dtype=np.uint64)
    neg_table = np.zeros((len(keys), kernels.n_words(n_neg)), dtype=np.uint64)
    rows: dict[tuple[int, float], int] = {}
    for row, (rpc, t) in enumerate(keys):
        col = dataset.exec_times[:, rpc]
        pos_table[row] = kernels.pack_bits(col[pos_order] >= t)
        neg_table[row] = kernels.pack_bits(col[neg_order] >= t)
        rows[(rpc, t)] = row
    pos_table.setflags(write=False)
    neg_table.setflags(write=False)
    return BitTables(pos_table, neg_table, rows, pos_order, neg_order, n_pos, n_neg)


def _empty_bits(tables: BitTables) -> SetBits:
    return SetBits(
        np.zeros(tables.pos_table.shape[1], dtype=np.uint64),
        np.zeros(tables.neg_table.shape[1], dtype=np.uint64),
        tables.n_pos,
        tables.n_neg,
    )


def eval_predicate(tables: BitTables, predicate: Predicate) -> SetBits:
    """lower & ~upper on both polarities."""
    lo = tables.row_for(predicate.rpc, predicate.e_min)
    hi = tables.row_for(predicate.rpc, predicate.e_max)
    pos = np.empty(tables.pos_table.shape[1], dtype=np.uint64)
    neg = np.empty(tables.neg_table.shape[1], dtype=np.uint64)
    kernels.and_not(tables.pos_table[lo], tables.pos_table[hi], pos)
    kernels.and_not(tables.neg_table[lo], tables.neg_table[hi], neg)
    return SetBits(pos, neg, tables.n_pos, tables.n_neg)


def eval_pattern(tables: BitTables, pattern: Pattern) -> SetBits:
    """AND across the pattern's predicates (void patterns hit nothing)."""
    if pattern.void:
        return _empty_bits(tables)
    k = len(pattern.predicates)
    lo_rows = np.empty(k, dtype=np.int64)
    hi_rows = np.empty(k, dtype=np.int64)
    for i, p in enumerate(pattern.predicates):
        lo_rows[i] = tables.row_for(p.rpc, p.e_min)
        hi_rows[i] = tables.row_for(p.rpc, p.e_max)
    pos = np.empty(tables.pos_table.shape[1], dtype=np.uint64)
    neg = np.empty(tables.neg_table.shape[1], dtype=np.uint64)
    kernels.pattern_bits(tables.pos_table, lo_rows, hi_rows, pos)
    kernels.pattern_bits(tables.neg_table, lo_rows, hi_rows, neg)
    return SetBits(pos, neg, tables.n_pos, tables.n_neg)


def eval_set(
    tables: BitTables,
    pattern_set: PatternSet,
    memo: Optional[dict] = None,
) -> SetBits:
    """OR across patterns; ``memo`` caches per-pattern bits within a generation."""
    pos = np.zeros(tables.pos_table.shape[1], dtype=np.uint64)
    neg = np.zeros(tables.neg_table.shape[1], dtype=np.uint64)
    for pattern in pattern_set.patterns:
        bits = pattern_hits(tables, pattern, memo)
        kernels.or_inplace(pos, bits.pos)
        kernels.or_inplace(neg, bits.neg)
    return SetBits(pos, neg, tables.n_pos, tables.n_neg)


def pattern_hits(
    tables: BitTables, pattern: Pattern, memo: Optional[dict] = None
) -> SetBits:
    if memo is None:
        return eval_pattern(tables, pattern)
    bits = memo.get(pattern)
    if bits is None:
        bits = eval_pattern(tables, pattern)
        memo[pattern] = bits
    return bits


def count_tp_fp(bits: SetBits) -> tuple[int, int]:
    return int(kernels.popcount(bits.pos)), int(kernels.popcount(bits.neg))


def hit_request_indices(tables: BitTables, bits: SetBits) -> np.ndarray:
    """Materialize hit bits back into dataset request indices (sorted)."""
    pos_hits = tables.pos_order[kernels.set_bit_indices(bits.pos, tables.n_pos)]
    neg_hits = tables.neg_order[kernels.set_bit_indices(bits.neg, tables.n_neg)]
    return np.sort(np.concatenate([pos_hits, neg_hits]))


