"""Per-RPC eligible split points from 1-D mean-shift clustering.

Each RPC's execution-time samples are clustered with a flat-kernel mean
shift whose bandwidth comes from a nearest-neighbour estimate.  Clusters too
small to matter are discarded, and the surviving dense regions are separated
by midpoint split points.  Predicate bounds are only ever drawn from these
values, which keeps the search away from rare or near-duplicate behaviours.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .errors import InsufficientDataError, SchemaMismatchError
from .model import Dataset

_CONVERGENCE_FACTOR = 1e-4
_MAX_ITER = 300
_ZERO_SPREAD_FLOOR = 1e-3  # ms, bandwidth when all samples coincide


@dataclass(frozen=True, eq=False)
class EligibleValues:
    """Strictly increasing split points for one RPC's execution-time axis."""

    rpc: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if len(values) < 2 or np.any(np.diff(values) <= 0):
            raise ValueError("eligible values must be >= 2 and strictly increasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class MeanShiftResult:
    centers: np.ndarray  # ascending
    assignment: np.ndarray  # per-sample index into centers
    bandwidth: float


def estimate_bandwidth(samples: np.ndarray, quantile: float = 0.3) -> float:
    """Mean distance to each sample's k-th nearest neighbour (self included).

    k = max(1, floor(quantile * n)).  Returns a small fixed floor when the
    samples have no spread at all.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = len(samples)
    if n < 2:
        raise InsufficientDataError("bandwidth estimation needs at least 2 samples")
    if not 0 < quantile <= 1:
        raise ValueError("quantile must be in (0, 1]")
    k = max(1, int(math.floor(quantile * n)))
    s = np.sort(samples)
    # The k nearest neighbours of s[i] (self included) form a size-k window
    # containing position i; the k-th distance is the best window's worst
    # edge.  With t the offset of i inside the window, the left edge distance
    # is non-decreasing in t and the right edge distance non-increasing, so
    # the optimum sits at their crossing: bisect it per sample.
    i = np.arange(n)

    def edge_worst(t):
        t = np.clip(t, np.maximum(0, i - (n - k)), np.minimum(i, k - 1))
        return np.maximum(s[i] - s[i - t], s[i - t + k - 1] - s[i])

    lo = np.maximum(0, i - (n - k))
    hi = np.minimum(i, k - 1)
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        left_dominates = (s[i] - s[i - mid]) >= (s[i - mid + k - 1] - s[i])
        hi = np.where(left_dominates, mid, hi)
        lo = np.where(left_dominates, lo, mid + 1)
    best = np.minimum(edge_worst(lo), edge_worst(lo - 1))
    bandwidth = float(best.mean())
    return bandwidth if bandwidth > 0 else _ZERO_SPREAD_FLOOR


def mean_shift_1d(samples: np.ndarray, bandwidth: float) -> MeanShiftResult:
    """Flat-kernel mean shift seeded at every distinct sample value.

    Seeds move to the mean of samples within +-bandwidth until displacement
    falls below 1e-4 * bandwidth (or 300 iterations).  Converged seeds closer
    than bandwidth/2 merge, the higher-population one winning; every sample
    is then assigned to its nearest surviving center.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) == 0:
        raise InsufficientDataError("mean shift needs at least 1 sample")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")

    s = np.sort(samples)
    prefix = np.concatenate([[0.0], np.cumsum(s)])
    seeds = np.unique(s)
    tol = _CONVERGENCE_FACTOR * bandwidth

    active = np.ones(len(seeds), dtype=bool)
    for _ in range(_MAX_ITER):
        if not active.any():
            break
        x = seeds[active]
        lo = np.searchsorted(s, x - bandwidth, side="left")
        hi = np.searchsorted(s, x + bandwidth, side="right")
        moved = (prefix[hi] - prefix[lo]) / (hi - lo)
        still = np.abs(moved - x) >= tol
        seeds[active] = moved
        active[active.nonzero()[0]] = still

    # population = samples within the window at convergence
    lo = np.searchsorted(s, seeds - bandwidth, side="left")
    hi = np.searchsorted(s, seeds + bandwidth, side="right")
    population = hi - lo

    # merge: greedily keep the strongest centers, suppressing any candidate
    # within bandwidth/2 of an already-kept one
    order = np.lexsort((seeds, -population))
    kept: list[float] = []
    for idx in order:
        c = seeds[idx]
        if all(abs(c - other) > bandwidth / 2 for other in kept):
            kept.append(float(c))
    centers = np.sort(np.asarray(kept))

    if len(centers) == 1:
        assignment = np.zeros(len(samples), dtype=np.intp)
    else:
        boundaries = (centers[:-1] + centers[1:]) / 2
        # ties at a boundary go to the lower-index center, like argmin would
        assignment = np.searchsorted(boundaries, samples, side="left")
    return MeanShiftResult(centers, assignment, float(bandwidth))


def build_eligible_values(
    dataset: Dataset,
    rpc: int,
    min_cluster_size: int,
    bandwidth_quantile: float = 0.3,
) -> Optional[EligibleValues]:
    """Split points for one RPC, or None when the RPC has no retained cluster.

    Split points are the minimum retained sample, the midpoint between every
    pair of adjacent retained clusters, and the maximum retained sample plus
    one ulp (the top interval is half-open and must contain its max).
    """
    if not 0 <= rpc < dataset.n_rpcs:
        raise SchemaMismatchError(f"RPC index {rpc} outside schema")
    samples = dataset.exec_times[:, rpc]
    if len(samples) < 2:
        return None
    bandwidth = estimate_bandwidth(samples, bandwidth_quantile)
    shift = mean_shift_1d(samples, bandwidth)

    populations = np.bincount(shift.assignment, minlength=len(shift.centers))
    retained = [c for c in range(len(shift.centers)) if populations[c] >= min_cluster_size]
    if not retained:
        return None

    extents = []
    for c in retained:
        members = samples[shift.assignment == c]
        extents.append((float(members.min()), float(members.max())))

    values = [extents[0][0]]
    for (_, left_max), (right_min, _) in zip(extents, extents[1:]):
        values.append((left_max + right_min) / 2)
    values.append(float(np.nextafter(extents[-1][1], np.inf)))
    return EligibleValues(rpc, np.unique(values))


def build_search_space(
    dataset: Dataset,
    cluster_fraction: float = 0.05,
    bandwidth_quantile: float = 0.3,
    workers: int = 1,
) -> dict[int, EligibleValues]:
    """Eligible values for every RPC that keeps at least one dense cluster.

    Per-RPC construction is independent; with ``workers > 1`` the RPCs are
    processed by a thread pool and collected in index order.
    """
    n_pos = int(np.count_nonzero(dataset.positives_mask()))
    min_cluster_size = max(1, math.ceil(n_pos * cluster_fraction))

    def one(rpc: int) -> Optional[EligibleValues]:
        return build_eligible_values(dataset, rpc, min_cluster_size, bandwidth_quantile)

    rpcs = range(dataset.n_rpcs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, rpcs))
    else:
        results = [one(rpc) for rpc in rpcs]
    return {rpc: ev for rpc, ev in zip(rpcs, results) if ev is not None}


def eligible_to_dict(
    eligible: Mapping[int, EligibleValues], schema: tuple[str, ...]
) -> dict[str, list[float]]:
    """Debug dump consumed by the report command."""
    return {schema[rpc]: [float(v) for v in ev.values] for rpc, ev in sorted(eligible.items())}
