"""The three fitness objectives: precision, recall, latency dissimilarity.

Latency dissimilarity sums, over every pattern in the set, the *average*
squared deviation of the latencies of the requests that pattern matches
(matched over all requests, positives and negatives alike) from the
pattern's mean matched latency.  A request matched by several patterns
contributes to each of their terms.  Averaging within each cluster is what
makes the objective favour splits that separate genuinely distinct latency
behaviours while penalizing gratuitous fragmentation, which would leave
per-cluster spread unchanged and so double the total.

Pattern sets containing any pattern whose own recall is at or below the
small-pattern threshold are penalized with the worst possible fitness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import bitset, kernels
from .bitset import BitTables, SetBits
from .errors import DegenerateAnalysisError
from .model import Dataset, PatternSet

@dataclass(frozen=True)
class FitnessTriple:
    precision: float
    recall: float
    dissimilarity: float

    def f1(self) -> float:
        if self.precision + self.recall == 0:
            return 0.0
        return 2 * self.precision * self.recall / (self.precision + self.recall)


#: Penalized fitness assigned to sets containing under-supported patterns.
WORST = FitnessTriple(0.0, 0.0, math.inf)


def _combine_moments(
    n1: int, mean1: float, m2_1: float, n2: int, mean2: float, m2_2: float
) -> tuple[int, float, float]:
    """Merge two (count, mean, sum-of-squared-deviations) accumulators."""
    n = n1 + n2
    if n == 0:
        return 0, 0.0, 0.0
    delta = mean2 - mean1
    mean = mean1 + delta * n2 / n
    m2 = m2_1 + m2_2 + delta * delta * n1 * n2 / n
    return n, mean, m2


class FitnessEvaluator:
    """Bit-table-backed evaluator shared by all fitness computations.

    Holds the latency vectors aligned with the bit positions of each
    polarity plus an optional per-generation memo of pattern bits.  The
    evaluator itself is read-only apart from the memo, whose entries are
    deterministic, so concurrent evaluate() calls are safe.
    """

    def __init__(
        self,
        tables: BitTables,
        dataset: Dataset,
        min_pattern_recall: float = 0.05,
    ) -> None:
        self.tables = tables
        self.min_pattern_recall = min_pattern_recall
        self.pos_latencies = np.ascontiguousarray(
            dataset.latencies[tables.pos_order], dtype=np.float64
        )
        self.neg_latencies = np.ascontiguousarray(
            dataset.latencies[tables.neg_order], dtype=np.float64
        )
        self.memo: dict = {}

    def clear_memo(self) -> None:
        self.memo = {}

    def set_counts(self, pattern_set: PatternSet) -> tuple[int, int]:
        bits = bitset.eval_set(self.tables, pattern_set, self.memo)
        return bitset.count_tp_fp(bits)

    def precision_recall(self, pattern_set: PatternSet) -> tuple[float, float]:
        if self.tables.n_pos == 0:
            raise DegenerateAnalysisError("no request violates the SLO")
        tp, fp = self.set_counts(pattern_set)
        precision = tp / (tp + fp) if tp + fp else 0.0
        return precision, tp / self.tables.n_pos

    def _pattern_stats(self, bits: SetBits) -> tuple[int, float]:
        """Positive-hit count and mean squared latency deviation over all hits."""
        n_p, mean_p, m2_p = kernels.masked_moments(bits.pos, self.pos_latencies)
        n_n, mean_n, m2_n = kernels.masked_moments(bits.neg, self.neg_latencies)
        n, _, m2 = _combine_moments(n_p, mean_p, m2_p, n_n, mean_n, m2_n)
        return n_p, (m2 / n if n else 0.0)

    def evaluate(self, pattern_set: PatternSet) -> FitnessTriple:
        if self.tables.n_pos == 0:
            raise DegenerateAnalysisError("no request violates the SLO")
        dissimilarity = 0.0
        per_pattern = []
        for pattern in pattern_set.patterns:
            bits = bitset.pattern_hits(self.tables, pattern, self.memo)
            tp_alone, m2 = self._pattern_stats(bits)
            if tp_alone / self.tables.n_pos <= self.min_pattern_recall:
                return WORST
            dissimilarity += m2
            per_pattern.append(bits)
        pos = np.zeros(self.tables.pos_table.shape[1], dtype=np.uint64)
        neg = np.zeros(self.tables.neg_table.shape[1], dtype=np.uint64)
        for bits in per_pattern:
            kernels.or_inplace(pos, bits.pos)
            kernels.or_inplace(neg, bits.neg)
        tp = kernels.popcount(pos)
        fp = kernels.popcount(neg)
        precision = tp / (tp + fp) if tp + fp else 0.0
        return FitnessTriple(precision, tp / self.tables.n_pos, dissimilarity)


def precision_recall(tables: BitTables, dataset: Dataset, pattern_set: PatternSet) -> tuple[float, float]:
    return FitnessEvaluator(tables, dataset).precision_recall(pattern_set)


def latency_dissimilarity(
    dataset: Dataset,
    pattern_set: PatternSet,
    hit_lists: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """Dissimilarity from per-pattern request-index hit lists over all requests.

    Each pattern contributes the average squared deviation of its matched
    latencies from their mean; an empty hit list contributes 0.  When
    ``hit_lists`` is omitted it is materialized by direct evaluation.
    """
    if hit_lists is None:
        hit_lists = []
        for pattern in pattern_set.patterns:
            if pattern.void:
                hit_lists.append(np.empty(0, dtype=np.intp))
                continue
            mask = np.ones(dataset.n_requests, dtype=bool)
            for p in pattern.predicates:
                col = dataset.exec_times[:, p.rpc]
                mask &= (col >= p.e_min) & (col < p.e_max)
            hit_lists.append(np.flatnonzero(mask))
    total = 0.0
    for hits in hit_lists:
        if len(hits) == 0:
            continue
        latencies = dataset.latencies[np.asarray(hits)]
        total += float(np.mean((latencies - latencies.mean()) ** 2))
    return total


def evaluate(
    tables: BitTables,
    dataset: Dataset,
    pattern_set: PatternSet,
    min_pattern_recall: float = 0.05,
    evaluator: Optional[FitnessEvaluator] = None,
) -> FitnessTriple:
    if evaluator is None:
        evaluator = FitnessEvaluator(tables, dataset, min_pattern_recall)
    return evaluator.evaluate(pattern_set)
