from __future__ import annotations

import numpy as np
import pytest

from lagmine.errors import SchemaMismatchError
from lagmine.model import (
    Dataset,
    Pattern,
    PatternSet,
    Predicate,
    Request,
    pattern_set_from_dict,
    pattern_set_to_dict,
    satisfies_pattern,
    satisfies_predicate,
    satisfies_set,
)

from conftest import make_dataset, make_eligible, random_pattern_set


def _request(**times) -> Request:
    # schema fixed as [auth, profile] for the hand examples
    exec_times = np.array([times.get("auth", 0.0), times.get("profile", 0.0)])
    return Request(exec_times=exec_times, latency=100.0)


AUTH, PROFILE = 0, 1


class TestPredicateSemantics:
    def test_lower_bound_inclusive(self):
        assert satisfies_predicate(_request(auth=175), Predicate(AUTH, 175, 350))

    def test_upper_bound_exclusive(self):
        assert not satisfies_predicate(_request(auth=350), Predicate(AUTH, 175, 350))

    def test_interior_value(self):
        assert satisfies_predicate(_request(auth=200), Predicate(AUTH, 175, 250))

    def test_unknown_rpc_is_schema_error(self):
        with pytest.raises(SchemaMismatchError):
            satisfies_predicate(_request(), Predicate(7, 0, 1))

    def test_empty_range_rejected(self):
        with pytest.raises(ValueError):
            Predicate(AUTH, 10, 10)
        with pytest.raises(ValueError):
            Predicate(AUTH, 20, 10)


class TestPatternSemantics:
    def test_conjunction(self):
        pattern = Pattern.build(
            [Predicate(AUTH, 100, 200), Predicate(PROFILE, 10, 50)]
        )
        assert satisfies_pattern(_request(auth=150, profile=20), pattern)
        assert not satisfies_pattern(_request(auth=150, profile=60), pattern)

    def test_single_predicate_degenerate_conjunction(self):
        pred = Predicate(AUTH, 100, 200)
        pattern = Pattern.build([pred])
        for value in (50, 100, 150, 200, 250):
            req = _request(auth=value)
            assert satisfies_pattern(req, pattern) == satisfies_predicate(req, pred)

    def test_duplicate_rpc_intersects(self):
        pattern = Pattern.build(
            [Predicate(AUTH, 25, 250), Predicate(AUTH, 175, 350)]
        )
        assert pattern.predicates == (Predicate(AUTH, 175, 250),)

    def test_empty_intersection_is_void(self):
        pattern = Pattern.build(
            [Predicate(AUTH, 25, 100), Predicate(AUTH, 200, 350)]
        )
        assert pattern.void
        assert not satisfies_pattern(_request(auth=50), pattern)
        assert not satisfies_pattern(_request(auth=250), pattern)

    def test_needs_a_predicate(self):
        with pytest.raises(ValueError):
            Pattern.build([])


class TestSetSemantics:
    def setup_method(self):
        self.p1 = Pattern.build([Predicate(AUTH, 100, 200)])
        self.p2 = Pattern.build([Predicate(PROFILE, 10, 50)])
        self.pattern_set = PatternSet.build([self.p1, self.p2])

    def test_one_pattern_suffices(self):
        assert satisfies_set(_request(auth=150, profile=90), self.pattern_set)

    def test_no_pattern_matched(self):
        assert not satisfies_set(_request(auth=90, profile=90), self.pattern_set)

    def test_overlapping_patterns_allowed(self):
        assert satisfies_set(_request(auth=150, profile=20), self.pattern_set)

    def test_structural_duplicates_collapse(self):
        dup = Pattern.build([Predicate(AUTH, 100, 200)])
        assert PatternSet.build([self.p1, dup]).size == 1

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            PatternSet.build([])


def test_set_is_disjunction_of_patterns(rng):
    """satisfies_set == OR over satisfies_pattern, exhaustively on small instances."""
    for _ in range(50):
        dataset = make_dataset(rng, n_requests=20, n_rpcs=3)
        eligible = make_eligible(dataset, rng)
        pattern_set = random_pattern_set(rng, eligible)
        for i in range(dataset.n_requests):
            req = dataset.request(i)
            expected = any(
                satisfies_pattern(req, p) for p in pattern_set.patterns
            )
            assert satisfies_set(req, pattern_set) == expected


def test_canonicalization_preserves_semantics(rng):
    """The canonical pattern matches iff the raw conjunction matches."""
    for _ in range(200):
        dataset = make_dataset(rng, n_requests=15, n_rpcs=3)
        values = np.sort(rng.uniform(0, 100, size=6))
        raw = []
        for _ in range(int(rng.integers(1, 5))):
            i = int(rng.integers(len(values) - 1))
            j = int(rng.integers(i + 1, len(values)))
            raw.append(Predicate(int(rng.integers(3)), float(values[i]), float(values[j])))
        canonical = Pattern.build(raw)
        for i in range(dataset.n_requests):
            req = dataset.request(i)
            expected = all(satisfies_predicate(req, p) for p in raw)
            assert satisfies_pattern(req, canonical) == expected


class TestJsonShape:
    def test_documented_shape(self):
        schema = ("web⋄home", "auth⋄check")
        pattern_set = PatternSet.build(
            [Pattern.build([Predicate(1, 175.0, 350.0)])]
        )
        payload = pattern_set_to_dict(pattern_set, schema)
        assert payload == {
            "patterns": [
                {"predicates": [{"rpc": "auth⋄check", "min": 175.0, "max": 350.0}]}
            ]
        }

    def test_round_trip(self, rng):
        for _ in range(30):
            dataset = make_dataset(rng, n_rpcs=4)
            eligible = make_eligible(dataset, rng)
            original = random_pattern_set(rng, eligible)
            payload = pattern_set_to_dict(original, dataset.schema)
            assert pattern_set_from_dict(payload, dataset.schema) == original

    def test_void_round_trip(self):
        schema = ("a⋄b",)
        void_set = PatternSet.build(
            [Pattern.build([Predicate(0, 0, 1), Predicate(0, 2, 3)])]
        )
        payload = pattern_set_to_dict(void_set, schema)
        assert payload["patterns"][0]["predicates"] == []
        assert pattern_set_from_dict(payload, schema) == void_set

    def test_unknown_rpc_rejected(self):
        with pytest.raises(SchemaMismatchError):
            pattern_set_from_dict(
                {"patterns": [{"predicates": [{"rpc": "nope", "min": 0, "max": 1}]}]},
                ("web⋄home",),
            )


class TestDataset:
    def test_positive_negative_partition(self, rng):
        dataset = make_dataset(rng)
        pos, neg = dataset.pos_indices(), dataset.neg_indices()
        assert len(pos) + len(neg) == dataset.n_requests
        assert np.all(dataset.latencies[pos] > dataset.slo)
        assert np.all(dataset.latencies[neg] <= dataset.slo)

    def test_latency_exactly_at_slo_is_negative(self):
        dataset = Dataset(
            schema=("a⋄b",),
            exec_times=np.array([[1.0], [2.0]]),
            latencies=np.array([100.0, 101.0]),
            slo=100.0,
        )
        assert dataset.pos_indices().tolist() == [1]

    def test_negative_values_rejected(self):
        with pytest.raises(ValueError):
            Dataset(
                schema=("a⋄b",),
                exec_times=np.array([[-1.0]]),
                latencies=np.array([1.0]),
                slo=1.0,
            )

    def test_immutable_arrays(self, rng):
        dataset = make_dataset(rng)
        with pytest.raises(ValueError):
            dataset.exec_times[0, 0] = 5.0
