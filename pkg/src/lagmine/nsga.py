"""Multi-objective evolutionary search over pattern sets.

Individuals are whole pattern sets; chromosomes are patterns; genes are
predicates.  Each generation builds an offspring population through a
three-way random branch (crossover / mutation / reproduction), evaluates it,
folds every evaluated individual into an all-time archive of non-dominated
solutions, and selects the next population from parents plus offspring by
non-domination rank and crowding distance.

A single seeded generator drives every stochastic choice in a fixed call
order; fitness evaluation consumes no randomness, so runs are reproducible
at any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, TextIO

import numpy as np

from .errors import ConfigError, EmptySearchSpaceError, LagmineError
from .model import Dataset, Pattern, PatternSet, Predicate
from .objectives import FitnessEvaluator, FitnessTriple
from .search_space import EligibleValues


@dataclass
class Individual:
    genome: PatternSet
    fitness: Optional[FitnessTriple] = None
    rank: Optional[int] = None
    crowding: Optional[float] = None


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 30
    generations: int = 300
    p_crossover: float = 0.6
    p_mutation: float = 0.4
    min_pattern_recall: float = 0.05
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if not (0 <= self.p_crossover <= 1 and 0 <= self.p_mutation <= 1):
            raise ConfigError("operator probabilities must lie in [0, 1]")
        if self.p_crossover + self.p_mutation > 1 + 1e-12:
            raise ConfigError("p_crossover + p_mutation must not exceed 1")


def dominates(a: FitnessTriple, b: FitnessTriple) -> bool:
    """Higher precision/recall, lower dissimilarity; at least one strict."""
    if a.precision < b.precision or a.recall < b.recall or a.dissimilarity > b.dissimilarity:
        return False
    return (
        a.precision > b.precision
        or a.recall > b.recall
        or a.dissimilarity < b.dissimilarity
    )


class ParetoArchive:
    """Every non-dominated (genome, fitness) pair seen during the search."""

    def __init__(self) -> None:
        self.members: list[tuple[PatternSet, FitnessTriple]] = []
        self._genomes: set[PatternSet] = set()

    def __len__(self) -> int:
        return len(self.members)

    def update(self, genome: PatternSet, fitness: FitnessTriple) -> bool:
        """Insert if non-dominated; evicts members the newcomer dominates."""
        if genome in self._genomes:
            return False
        for _, other in self.members:
            if dominates(other, fitness):
                return False
        survivors = []
        for member in self.members:
            if dominates(fitness, member[1]):
                self._genomes.discard(member[0])
            else:
                survivors.append(member)
        survivors.append((genome, fitness))
        self.members = survivors
        self._genomes.add(genome)
        return True

    def best_f1(self) -> float:
        return max((fit.f1() for _, fit in self.members), default=0.0)


def _searchable_rpcs(eligible: Mapping[int, EligibleValues]) -> list[int]:
    return sorted(rpc for rpc, ev in eligible.items() if len(ev.values) >= 2)


def random_predicate(
    eligible: Mapping[int, EligibleValues],
    rng: np.random.Generator,
    rpcs: Optional[Sequence[int]] = None,
) -> Predicate:
    """Random gene: rpc, then lower bound, then a strictly greater upper bound."""
    if rpcs is None:
        rpcs = _searchable_rpcs(eligible)
    if not rpcs:
        raise EmptySearchSpaceError("no RPC has at least two eligible values")
    rpc = rpcs[int(rng.integers(len(rpcs)))]
    values = eligible[rpc].values
    i_min = int(rng.integers(len(values) - 1))  # the maximum is excluded
    i_max = int(rng.integers(i_min + 1, len(values)))
    return Predicate(rpc, float(values[i_min]), float(values[i_max]))


def init_population(
    config: GaConfig,
    eligible: Mapping[int, EligibleValues],
    rng: np.random.Generator,
) -> list[Individual]:
    """Population of single-chromosome, single-gene individuals."""
    rpcs = _searchable_rpcs(eligible)
    if not rpcs:
        raise EmptySearchSpaceError("no RPC has at least two eligible values")
    return [
        Individual(PatternSet.build([Pattern.build([random_predicate(eligible, rng, rpcs)])]))
        for _ in range(config.population_size)
    ]


def crossover(
    parent_a: PatternSet, parent_b: PatternSet, rng: np.random.Generator
) -> PatternSet:
    """Interleave the parents' chromosomes, cut, keep the left part."""
    a, b = parent_a.patterns, parent_b.patterns
    interleaved: list[Pattern] = []
    for i in range(max(len(a), len(b))):
        if i < len(a):
            interleaved.append(a[i])
        if i < len(b):
            interleaved.append(b[i])
    cut = int(rng.integers(1, len(interleaved) + 1))
    return PatternSet.build(interleaved[:cut])


def split_pattern(
    pattern: Pattern,
    eligible: Mapping[int, EligibleValues],
    rng: np.random.Generator,
) -> Optional[tuple[Pattern, Pattern]]:
    """Split a pattern at a random eligible threshold of a random RPC.

    When the pattern constrains the chosen RPC its range is the one split,
    otherwise the RPC's full eligible range is; the split threshold must lie
    strictly inside.  Returns None when no RPC admits a valid threshold.
    """
    if pattern.void:
        return None
    candidates: list[tuple[int, float, float, np.ndarray]] = []
    for rpc in _searchable_rpcs(eligible):
        values = eligible[rpc].values
        existing = pattern.predicate_on(rpc)
        if existing is not None:
            lo, hi = existing.e_min, existing.e_max
        else:
            lo, hi = float(values[0]), float(values[-1])
        ts = values[(values > lo) & (values < hi)]
        if len(ts):
            candidates.append((rpc, lo, hi, ts))
    if not candidates:
        return None
    rpc, lo, hi, ts = candidates[int(rng.integers(len(candidates)))]
    t = float(ts[int(rng.integers(len(ts)))])
    rest = [p for p in pattern.predicates if p.rpc != rpc]
    return (
        Pattern.build(rest + [Predicate(rpc, lo, t)]),
        Pattern.build(rest + [Predicate(rpc, t, hi)]),
    )


def mutate(
    genome: PatternSet,
    config: GaConfig,
    eligible: Mapping[int, EligibleValues],
    rng: np.random.Generator,
) -> PatternSet:
    """Individual-level add/remove/split, then per-chromosome gene mutation."""
    patterns = list(genome.patterns)
    branch = rng.uniform(0, 3)
    if branch < 1:  # remove a pattern, guarded against emptying the set
        if len(patterns) > 1:
            del patterns[int(rng.integers(len(patterns)))]
    elif branch < 2:  # add a new random single-gene pattern
        patterns.append(Pattern.build([random_predicate(eligible, rng)]))
    else:  # split a random pattern in two
        idx = int(rng.integers(len(patterns)))
        parts = split_pattern(patterns[idx], eligible, rng)
        if parts is not None:
            del patterns[idx]
            patterns.extend(parts)

    mutated: list[Pattern] = []
    for pat in patterns:
        r = rng.uniform()
        if r < config.p_mutation and not pat.void:
            if r < config.p_mutation / 2:  # drop a gene, keep at least one
                if pat.size > 1:
                    preds = list(pat.predicates)
                    del preds[int(rng.integers(len(preds)))]
                    pat = Pattern.build(preds)
            else:  # add a gene; same-rpc ranges intersect at canonicalization
                pat = Pattern.build(
                    list(pat.predicates) + [random_predicate(eligible, rng)]
                )
        mutated.append(pat)
    return PatternSet.build(mutated)


def nondominated_sort(fitnesses: Sequence[FitnessTriple]) -> list[list[int]]:
    """Fast non-dominated sorting; returns fronts as index lists."""
    n = len(fitnesses)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(fitnesses[i], fitnesses[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(fitnesses[j], fitnesses[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    fronts: list[list[int]] = []
    current = [i for i in range(n) if domination_count[i] == 0]
    while current:
        fronts.append(current)
        nxt: list[int] = []
        for i in current:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current = nxt
    return fronts


def crowding_distance(fitnesses: Sequence[FitnessTriple]) -> np.ndarray:
    """Per-individual crowding distance within one front.

    Boundary individuals get +inf per objective; inner distances are
    normalized by the front's objective range, a zero or non-finite range
    contributing nothing.
    """
    n = len(fitnesses)
    distance = np.zeros(n)
    if n == 0:
        return distance
    for values in (
        np.array([f.precision for f in fitnesses]),
        np.array([f.recall for f in fitnesses]),
        np.array([f.dissimilarity for f in fitnesses]),
    ):
        order = np.argsort(values, kind="stable")
        distance[order[0]] = np.inf
        distance[order[-1]] = np.inf
        lo, hi = values[order[0]], values[order[-1]]
        # a zero or non-finite range (e.g. penalized +inf members) adds nothing;
        # a finite max implies every value in between is finite too
        if n > 2 and np.isfinite(hi) and hi > lo:
            gaps = (values[order[2:]] - values[order[:-2]]) / (hi - lo)
            distance[order[1:-1]] += gaps
    return distance


def rank_population(individuals: Sequence[Individual]) -> None:
    """Assign rank and crowding to every individual (all must be evaluated)."""
    for ind in individuals:
        if ind.fitness is None:
            raise LagmineError("cannot sort unevaluated individuals")
    fronts = nondominated_sort([ind.fitness for ind in individuals])
    for rank, front in enumerate(fronts, start=1):
        crowd = crowding_distance([individuals[i].fitness for i in front])
        for slot, i in enumerate(front):
            individuals[i].rank = rank
            individuals[i].crowding = float(crowd[slot])


def select_next(
    offspring: Sequence[Individual],
    parents: Sequence[Individual],
    population_size: int,
) -> list[Individual]:
    """NSGA-II elitism: best by (rank asc, crowding desc), stable on ties."""
    combined = list(offspring) + list(parents)
    rank_population(combined)
    combined.sort(key=lambda ind: (ind.rank, -ind.crowding))
    return combined[:population_size]


def _evaluate_all(
    individuals: Sequence[Individual], evaluator: FitnessEvaluator, workers: int
) -> None:
    pending = [ind for ind in individuals if ind.fitness is None]
    if workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ind: evaluator.evaluate(ind.genome), pending))
        for ind, fitness in zip(pending, results):  # collected by index
            ind.fitness = fitness
    else:
        for ind in pending:
            ind.fitness = evaluator.evaluate(ind.genome)


def run(
    dataset: Dataset,
    eligible: Mapping[int, EligibleValues],
    tables,
    config: GaConfig,
    workers: int = 1,
    progress: Optional[TextIO] = None,
    on_generation: Optional[Callable[[int, ParetoArchive, list[Individual]], None]] = None,
) -> ParetoArchive:
    """Full evolutionary run; returns the all-time Pareto archive.

    ``progress`` receives one tab-separated line per generation
    (generation, archive size, best F1).  ``on_generation`` is a test and
    telemetry hook called after each selection step.
    """
    rng = np.random.default_rng(config.rng_seed)
    evaluator = FitnessEvaluator(tables, dataset, config.min_pattern_recall)
    archive = ParetoArchive()

    population = init_population(config, eligible, rng)
    _evaluate_all(population, evaluator, workers)
    for ind in population:
        archive.update(ind.genome, ind.fitness)

    for generation in range(config.generations):
        evaluator.clear_memo()  # bound the per-generation pattern memo
        offspring: list[Individual] = []
        for _ in range(len(population)):
            r = rng.random()
            if r < config.p_crossover:
                i1 = int(rng.integers(len(population)))
                i2 = int(rng.integers(len(population)))
                child = Individual(
                    crossover(population[i1].genome, population[i2].genome, rng)
                )
            elif r < config.p_crossover + config.p_mutation:
                i = int(rng.integers(len(population)))
                child = Individual(mutate(population[i].genome, config, eligible, rng))
            else:  # reproduction: copy, reusing the deterministic fitness
                i = int(rng.integers(len(population)))
                child = Individual(population[i].genome, fitness=population[i].fitness)
            offspring.append(child)

        _evaluate_all(offspring, evaluator, workers)
        for ind in offspring:
            archive.update(ind.genome, ind.fitness)
        population = select_next(offspring, population, config.population_size)

        if progress is not None:
            progress.write(f"{generation}\t{len(archive)}\t{archive.best_f1():.6f}\n")
        if on_generation is not None:
            on_generation(generation, archive, population)

    return archive
