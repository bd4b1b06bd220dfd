from __future__ import annotations

import numpy as np
import pytest

from lagmine.errors import InsufficientDataError, SchemaMismatchError
from lagmine.model import Dataset
from lagmine.search_space import (
    build_eligible_values,
    build_search_space,
    eligible_to_dict,
    estimate_bandwidth,
    mean_shift_1d,
)


def _column_dataset(samples, slo=0.0) -> Dataset:
    samples = np.asarray(samples, dtype=np.float64)
    return Dataset(
        schema=("rpc⋄op",),
        exec_times=samples[:, None],
        latencies=np.abs(samples) + 1.0,
        slo=slo,
    )


# ---------------------------------------------------------------------------
# bandwidth estimation
# ---------------------------------------------------------------------------


def _knn_bandwidth_oracle(samples, quantile):
    """Exhaustive k-th nearest neighbour distance, self included.

    Applies the same zero-spread floor as the implementation (a usable
    bandwidth must be positive)."""
    samples = np.asarray(samples, dtype=np.float64)
    k = max(1, int(np.floor(quantile * len(samples))))
    dists = np.sort(np.abs(samples[:, None] - samples[None, :]), axis=1)
    mean = float(dists[:, k - 1].mean())
    return mean if mean > 0 else 1e-3


class TestEstimateBandwidth:
    def test_zero_spread_floor(self):
        assert estimate_bandwidth(np.array([0.0, 0.0, 0.0, 0.0]), 0.5) == 1e-3

    def test_two_points_full_quantile(self):
        assert estimate_bandwidth(np.array([0.0, 10.0]), 1.0) == 10.0

    def test_skewed_four_points(self):
        samples = np.array([1.0, 2.0, 3.0, 100.0])
        oracle = _knn_bandwidth_oracle(samples, 0.5)
        assert oracle == 25.0  # (1 + 1 + 1 + 97) / 4
        assert estimate_bandwidth(samples, 0.5) == pytest.approx(oracle)

    def test_matches_knn_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 40))
            samples = rng.uniform(0, 50, n)
            quantile = float(rng.uniform(0.05, 1.0))
            assert estimate_bandwidth(samples, quantile) == pytest.approx(
                _knn_bandwidth_oracle(samples, quantile)
            )

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            estimate_bandwidth(np.array([1.0]), 0.3)

    def test_quantile_bounds(self):
        with pytest.raises(ValueError):
            estimate_bandwidth(np.array([1.0, 2.0]), 0.0)


# ---------------------------------------------------------------------------
# mean shift
# ---------------------------------------------------------------------------


def _mean_shift_oracle(samples, bandwidth):
    """Naive per-seed fixed-point iteration, then the same merge rule."""
    samples = np.asarray(samples, dtype=np.float64)
    converged = []
    for seed in np.unique(samples):
        x = seed
        for _ in range(300):
            window = samples[np.abs(samples - x) <= bandwidth]
            moved = window.mean()
            if abs(moved - x) < 1e-4 * bandwidth:
                x = moved
                break
            x = moved
        population = int(np.sum(np.abs(samples - x) <= bandwidth))
        converged.append((x, population))

    order = sorted(range(len(converged)), key=lambda i: (-converged[i][1], converged[i][0]))
    kept = []
    for i in order:
        center = converged[i][0]
        if all(abs(center - c) > bandwidth / 2 for c in kept):
            kept.append(center)
    centers = np.sort(kept)
    assignment = np.array([int(np.argmin(np.abs(centers - s))) for s in samples])
    return centers, assignment


class TestMeanShift:
    def test_two_well_separated_groups(self):
        samples = np.array([1.0, 1.1, 0.9, 5.0, 5.2, 4.8])
        result = mean_shift_1d(samples, 1.0)
        np.testing.assert_allclose(result.centers, [1.0, 5.0])
        assert result.assignment.tolist() == [0, 0, 0, 1, 1, 1]

    def test_identical_samples_single_center(self):
        result = mean_shift_1d(np.array([7.0, 7.0, 7.0]), 2.0)
        np.testing.assert_allclose(result.centers, [7.0])
        assert result.assignment.tolist() == [0, 0, 0]

    def test_bandwidth_covering_range_gives_global_mean(self):
        samples = np.array([1.0, 2.0, 6.0])
        result = mean_shift_1d(samples, 10.0)
        np.testing.assert_allclose(result.centers, [samples.mean()])

    def test_matches_naive_fixed_point_oracle(self, rng):
        for _ in range(60):
            n = int(rng.integers(3, 60))
            samples = np.round(rng.uniform(0, 30, n), 2)
            bandwidth = float(rng.uniform(0.5, 8.0))
            expected_centers, expected_assignment = _mean_shift_oracle(samples, bandwidth)
            result = mean_shift_1d(samples, bandwidth)
            np.testing.assert_allclose(result.centers, expected_centers, rtol=1e-9)
            assert result.assignment.tolist() == expected_assignment.tolist()

    def test_center_separation_invariant(self, rng):
        for _ in range(40):
            samples = rng.uniform(0, 20, int(rng.integers(2, 80)))
            bandwidth = float(rng.uniform(0.3, 5.0))
            centers = mean_shift_1d(samples, bandwidth).centers
            if len(centers) > 1:
                assert np.diff(centers).min() > bandwidth / 2

    def test_every_sample_assigned_to_nearest_center(self, rng):
        for _ in range(40):
            samples = rng.uniform(0, 20, int(rng.integers(2, 80)))
            result = mean_shift_1d(samples, float(rng.uniform(0.3, 5.0)))
            for s, a in zip(samples, result.assignment):
                nearest = np.abs(result.centers - s).min()
                assert abs(result.centers[a] - s) == pytest.approx(nearest)

    def test_requires_positive_bandwidth(self):
        with pytest.raises(ValueError):
            mean_shift_1d(np.array([1.0]), 0.0)


# ---------------------------------------------------------------------------
# eligible values
# ---------------------------------------------------------------------------


def _auth_like_samples() -> np.ndarray:
    """Bimodal-plus-tail execution times whose dense regions sit so that the
    split points land at 25 / 175 / 250 / 350 (extreme samples planted)."""
    rng = np.random.default_rng(42)
    a = np.clip(rng.normal(77, 15, 98), 26, 129)
    b = np.clip(rng.normal(225, 2.0, 38), 221, 229)
    c = np.clip(rng.normal(310, 11, 58), 271, 349)
    return np.concatenate(
        [[25.0, 130.0], a, [220.0, 230.0], b, [270.0, 350.0], c]
    )


class TestEligibleValues:
    def test_auth_like_distribution(self):
        dataset = _column_dataset(_auth_like_samples())
        ev = build_eligible_values(dataset, 0, min_cluster_size=10)
        assert ev is not None
        assert len(ev.values) == 4  # 4 split points bounding 3 dense regions
        np.testing.assert_allclose(ev.values, [25.0, 175.0, 250.0, 350.0], atol=1e-9)
        assert ev.values[-1] > 350.0  # top interval keeps its maximum

    def test_unimodal_envelope_only(self):
        # one dense region: a full-quantile bandwidth keeps it a single
        # cluster, so only the {min, max + ulp} envelope remains
        samples = np.linspace(10.0, 20.0, 41)
        ev = build_eligible_values(
            _column_dataset(samples), 0, min_cluster_size=2, bandwidth_quantile=1.0
        )
        assert ev is not None
        np.testing.assert_allclose(
            ev.values, [10.0, np.nextafter(20.0, np.inf)], rtol=0
        )

    def test_two_cluster_midpoint(self):
        samples = np.array([1.0, 1.1, 0.9, 5.0, 5.2, 4.8])
        ev = build_eligible_values(
            _column_dataset(samples), 0, min_cluster_size=1, bandwidth_quantile=0.6
        )
        assert ev is not None
        np.testing.assert_allclose(
            ev.values, [0.9, 2.95, np.nextafter(5.2, np.inf)], rtol=1e-12
        )

    def test_all_clusters_below_threshold_excluded(self):
        samples = np.array([1.0, 1.1, 0.9, 5.0, 5.2, 4.8])
        assert (
            build_eligible_values(_column_dataset(samples), 0, min_cluster_size=10)
            is None
        )

    def test_discarded_cluster_not_isolatable(self):
        # a sparse far-out tail below the size threshold leaves no split
        # point that could isolate it
        rng = np.random.default_rng(1)
        dense = rng.uniform(10, 12, 60)
        stragglers = np.array([500.0, 503.0])
        dataset = _column_dataset(np.concatenate([dense, stragglers]))
        ev = build_eligible_values(dataset, 0, min_cluster_size=5)
        assert ev is not None
        assert ev.values[-1] < 400  # envelope never reaches the stragglers

    def test_retained_samples_inside_envelope(self, rng):
        for _ in range(30):
            samples = rng.uniform(0, 50, int(rng.integers(4, 120)))
            dataset = _column_dataset(samples)
            ev = build_eligible_values(dataset, 0, min_cluster_size=2)
            if ev is None:
                continue
            assert np.all(np.diff(ev.values) > 0)
            # every sample retained by clustering lies in [first, last)
            inside = (samples >= ev.values[0]) & (samples < ev.values[-1])
            assert inside.sum() >= 2

    def test_deterministic(self, rng):
        samples = rng.uniform(0, 100, 200)
        dataset = _column_dataset(samples)
        first = build_eligible_values(dataset, 0, min_cluster_size=3)
        second = build_eligible_values(dataset, 0, min_cluster_size=3)
        np.testing.assert_array_equal(first.values, second.values)

    def test_unknown_rpc(self, rng):
        with pytest.raises(SchemaMismatchError):
            build_eligible_values(_column_dataset(rng.uniform(0, 1, 10)), 3, 1)


def test_build_search_space_parallel_matches_serial(rng):
    exec_times = rng.uniform(0, 100, size=(150, 5))
    latencies = rng.uniform(0, 100, size=150)
    dataset = Dataset(
        schema=tuple(f"s{j}⋄op" for j in range(5)),
        exec_times=exec_times,
        latencies=latencies,
        slo=50.0,
    )
    serial = build_search_space(dataset, workers=1)
    threaded = build_search_space(dataset, workers=4)
    assert serial.keys() == threaded.keys()
    for rpc in serial:
        np.testing.assert_array_equal(serial[rpc].values, threaded[rpc].values)
    dump = eligible_to_dict(serial, dataset.schema)
    assert set(dump) <= set(dataset.schema)
