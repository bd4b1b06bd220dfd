"""Domain model: requests, datasets, predicates, patterns, pattern sets.

A predicate is a half-open execution-time range on one RPC; a pattern is a
conjunction of predicates; a pattern set is a disjunction of patterns.  All
types are immutable after construction and the satisfaction functions are
pure, so they can be evaluated from any number of workers.

RPCs are referred to by their integer column index; display names live only
in ``Dataset.schema`` and in the JSON wire format.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import SchemaMismatchError

#: Label value meaning "this request was not assigned to any planted issue".
NO_LABEL = "-"


@dataclass(frozen=True)
class Request:
    """One end-to-end request: cumulative per-RPC times plus overall latency.

    ``exec_times[j]`` is the cumulative execution time (ms) of RPC ``j``;
    an RPC that was never invoked is recorded as 0.
    """

    exec_times: np.ndarray
    latency: float
    label: Optional[str] = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of requests with a fixed RPC schema and an SLO.

    Request order is stable for the lifetime of an analysis: bit positions in
    the evaluation tables are derived from it.  Requests with latency
    strictly above ``slo`` are positives; the rest are negatives.
    """

    schema: tuple[str, ...]
    exec_times: np.ndarray  # (n_requests, n_rpcs) float64
    latencies: np.ndarray  # (n_requests,) float64
    slo: float
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        exec_times = np.ascontiguousarray(self.exec_times, dtype=np.float64)
        latencies = np.ascontiguousarray(self.latencies, dtype=np.float64)
        if exec_times.ndim != 2 or exec_times.shape[1] != len(self.schema):
            raise ValueError("exec_times shape does not match schema")
        if latencies.shape != (exec_times.shape[0],):
            raise ValueError("latencies shape does not match request count")
        if np.any(latencies < 0) or np.any(exec_times < 0):
            raise ValueError("negative execution time or latency")
        if self.labels is not None and len(self.labels) != exec_times.shape[0]:
            raise ValueError("labels length does not match request count")
        exec_times.setflags(write=False)
        latencies.setflags(write=False)
        object.__setattr__(self, "exec_times", exec_times)
        object.__setattr__(self, "latencies", latencies)

    @property
    def n_requests(self) -> int:
        return self.exec_times.shape[0]

    @property
    def n_rpcs(self) -> int:
        return len(self.schema)

    def rpc_index(self, name: str) -> int:
        try:
            return self.schema.index(name)
        except ValueError:
            raise SchemaMismatchError(f"unknown RPC {name!r}") from None

    def positives_mask(self) -> np.ndarray:
        return self.latencies > self.slo

    def pos_indices(self) -> np.ndarray:
        return np.flatnonzero(self.latencies > self.slo)

    def neg_indices(self) -> np.ndarray:
        return np.flatnonzero(self.latencies <= self.slo)

    def request(self, i: int) -> Request:
        label = self.labels[i] if self.labels is not None else None
        return Request(self.exec_times[i], float(self.latencies[i]), label)

    def label_indices(self, label: str) -> np.ndarray:
        if self.labels is None:
            return np.empty(0, dtype=np.intp)
        arr = np.asarray(self.labels, dtype=object)
        return np.flatnonzero(arr == label)

    def distinct_labels(self) -> list[str]:
        """Ground-truth labels present, excluding the no-label marker."""
        if self.labels is None:
            return []
        seen: dict[str, None] = {}
        for lab in self.labels:
            if lab != NO_LABEL:
                seen.setdefault(lab, None)
        return sorted(seen)


@dataclass(frozen=True, order=True)
class Predicate:
    """Half-open range check ``e_min <= exec_times[rpc] < e_max``."""

    rpc: int
    e_min: float
    e_max: float

    def __post_init__(self) -> None:
        if not self.e_min < self.e_max:
            raise ValueError(f"empty predicate range [{self.e_min}, {self.e_max})")


@dataclass(frozen=True)
class Pattern:
    """Conjunction of predicates, at most one per RPC after canonicalization.

    Duplicate-RPC predicates are intersected when the pattern is built; an
    empty intersection yields a *void* pattern that matches no request
    (``predicates`` is empty and ``void`` is set).
    """

    predicates: tuple[Predicate, ...]
    void: bool = field(default=False)

    @classmethod
    def build(cls, predicates: Iterable[Predicate]) -> "Pattern":
        by_rpc: dict[int, tuple[float, float]] = {}
        for p in predicates:
            lo, hi = by_rpc.get(p.rpc, (p.e_min, p.e_max))
            lo, hi = max(lo, p.e_min), min(hi, p.e_max)
            by_rpc[p.rpc] = (lo, hi)
        if not by_rpc:
            raise ValueError("pattern needs at least one predicate")
        if any(lo >= hi for lo, hi in by_rpc.values()):
            return cls(predicates=(), void=True)
        merged = tuple(
            Predicate(rpc, lo, hi) for rpc, (lo, hi) in sorted(by_rpc.items())
        )
        return cls(predicates=merged)

    @property
    def size(self) -> int:
        return len(self.predicates)

    def rpcs(self) -> tuple[int, ...]:
        return tuple(p.rpc for p in self.predicates)

    def predicate_on(self, rpc: int) -> Optional[Predicate]:
        for p in self.predicates:
            if p.rpc == rpc:
                return p
        return None

    def sort_key(self) -> tuple:
        return (self.void, tuple((p.rpc, p.e_min, p.e_max) for p in self.predicates))


@dataclass(frozen=True)
class PatternSet:
    """Disjunction of structurally distinct patterns, in canonical order."""

    patterns: tuple[Pattern, ...]

    @classmethod
    def build(cls, patterns: Iterable[Pattern]) -> "PatternSet":
        unique: dict[Pattern, None] = {}
        for p in patterns:
            unique.setdefault(p, None)
        if not unique:
            raise ValueError("pattern set needs at least one pattern")
        return cls(tuple(sorted(unique, key=Pattern.sort_key)))

    @property
    def size(self) -> int:
        return len(self.patterns)

    def sort_key(self) -> tuple:
        return tuple(p.sort_key() for p in self.patterns)


def satisfies_predicate(request: Request, predicate: Predicate) -> bool:
    """True iff the request's time on the predicate's RPC lies in its range."""
    if not 0 <= predicate.rpc < len(request.exec_times):
        raise SchemaMismatchError(f"RPC index {predicate.rpc} outside schema")
    e = request.exec_times[predicate.rpc]
    return bool(predicate.e_min <= e < predicate.e_max)


def satisfies_pattern(request: Request, pattern: Pattern) -> bool:
    if pattern.void:
        return False
    return all(satisfies_predicate(request, p) for p in pattern.predicates)


def satisfies_set(request: Request, pattern_set: PatternSet) -> bool:
    return any(satisfies_pattern(request, p) for p in pattern_set.patterns)


def pattern_set_to_dict(pattern_set: PatternSet, schema: Sequence[str]) -> dict:
    """Serialize to the documented JSON shape (RPCs by display name)."""
    patterns = []
    for pat in pattern_set.patterns:
        patterns.append(
            {
                "predicates": [
                    {"rpc": schema[p.rpc], "min": p.e_min, "max": p.e_max}
                    for p in pat.predicates
                ]
            }
        )
    return {"patterns": patterns}


def pattern_set_from_dict(data: Mapping, schema: Sequence[str]) -> PatternSet:
    """Inverse of :func:`pattern_set_to_dict`; unknown RPC names are errors."""
    index = {name: j for j, name in enumerate(schema)}
    patterns = []
    for pat in data["patterns"]:
        preds = pat["predicates"]
        if not preds:  # void pattern round-trip
            patterns.append(Pattern(predicates=(), void=True))
            continue
        built = []
        for p in preds:
            name = p["rpc"]
            if name not in index:
                raise SchemaMismatchError(f"unknown RPC {name!r} in pattern JSON")
            built.append(Predicate(index[name], float(p["min"]), float(p["max"])))
        patterns.append(Pattern.build(built))
    return PatternSet.build(patterns)
