"""Shared builders for randomized tests.

Random datasets get thresholds drawn from their own sample values so that
every generated predicate endpoint exists in the bit tables, mirroring how
the search space constrains real runs.
"""

from __future__ import annotations

import numpy as np
import pytest

from lagmine.model import Dataset, Pattern, PatternSet, Predicate
from lagmine.search_space import EligibleValues


def make_dataset(
    rng: np.random.Generator,
    n_requests: int = 60,
    n_rpcs: int = 4,
    labeled: bool = False,
) -> Dataset:
    exec_times = rng.uniform(0, 100, size=(n_requests, n_rpcs))
    latencies = rng.uniform(0, 1000, size=n_requests)
    labels = None
    if labeled:
        draw = rng.random(n_requests)
        labels = tuple(
            "A1" if u < 0.15 else "A2" if u < 0.3 else "-" for u in draw
        )
    return Dataset(
        schema=tuple(f"svc{j}⋄op{j}" for j in range(n_rpcs)),
        exec_times=exec_times,
        latencies=latencies,
        slo=float(np.median(latencies)),
        labels=labels,
    )


def make_eligible(
    dataset: Dataset, rng: np.random.Generator, per_rpc: int = 4
) -> dict[int, EligibleValues]:
    """Random strictly increasing thresholds drawn around each column."""
    eligible = {}
    for rpc in range(dataset.n_rpcs):
        col = dataset.exec_times[:, rpc]
        k = min(int(rng.integers(2, per_rpc + 1)), len(col))
        values = np.unique(rng.choice(col, size=k, replace=False))
        values = np.append(values, np.nextafter(col.max(), np.inf))
        values = np.unique(values)
        if len(values) < 2:
            values = np.array([col.min(), np.nextafter(col.max(), np.inf)])
        eligible[rpc] = EligibleValues(rpc, values)
    return eligible


def random_pattern(
    rng: np.random.Generator, eligible: dict[int, EligibleValues], max_preds: int = 3
) -> Pattern:
    n_preds = int(rng.integers(1, max_preds + 1))
    preds = []
    for _ in range(n_preds):
        rpc = int(rng.choice(sorted(eligible)))
        values = eligible[rpc].values
        i = int(rng.integers(len(values) - 1))
        j = int(rng.integers(i + 1, len(values)))
        preds.append(Predicate(rpc, float(values[i]), float(values[j])))
    return Pattern.build(preds)


def random_pattern_set(
    rng: np.random.Generator,
    eligible: dict[int, EligibleValues],
    max_patterns: int = 5,
    max_preds: int = 3,
) -> PatternSet:
    n = int(rng.integers(1, max_patterns + 1))
    return PatternSet.build(
        random_pattern(rng, eligible, max_preds) for _ in range(n)
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
