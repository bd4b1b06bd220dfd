"""End-to-end pipeline plumbing: detect runs, multi-run scoring, sweeps.

`detect` chains search-space construction, bit-table precomputation, the
evolutionary search and the final decision step.  The sweep helpers
reproduce the three experiment families of the evaluation harness at desk
scale: random planted-issue scenarios, the latency-distance grid, and the
non-critical-delay grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, TextIO

import numpy as np

from . import bitset, evaluation, nsga, scenario, search_space
from .decision import DecisionConfig, decide
from .errors import DegenerateAnalysisError, LagmineError
from .model import Dataset, PatternSet, pattern_set_to_dict
from .nsga import GaConfig
from .objectives import FitnessTriple
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a detect run; serialized with outputs for provenance."""

    seed: int = 0
    population: int = 30
    generations: int = 300
    p_crossover: float = 0.6
    p_mutation: float = 0.4
    min_pattern_recall: float = 0.05
    cluster_fraction: float = 0.05
    bandwidth_quantile: float = 0.3
    workers: int = 1

    def ga_config(self) -> GaConfig:
        return GaConfig(
            population_size=self.population,
            generations=self.generations,
            p_crossover=self.p_crossover,
            p_mutation=self.p_mutation,
            min_pattern_recall=self.min_pattern_recall,
            rng_seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "population": self.population,
            "generations": self.generations,
            "p_crossover": self.p_crossover,
            "p_mutation": self.p_mutation,
            "min_pattern_recall": self.min_pattern_recall,
            "cluster_fraction": self.cluster_fraction,
            "bandwidth_quantile": self.bandwidth_quantile,
            "workers": self.workers,
        }


@dataclass
class DetectResult:
    pattern_set: PatternSet
    fitness: FitnessTriple
    archive_size: int
    report: dict


def detect(
    dataset: Dataset, config: RunConfig = RunConfig(), progress: Optional[TextIO] = None
) -> DetectResult:
    """Full detection pipeline on an in-memory dataset."""
    if not dataset.positives_mask().any():
        raise DegenerateAnalysisError("no request has latency above the SLO")
    eligible = search_space.build_search_space(
        dataset,
        cluster_fraction=config.cluster_fraction,
        bandwidth_quantile=config.bandwidth_quantile,
        workers=config.workers,
    )
    tables = bitset.precompute(dataset, eligible)
    archive = nsga.run(
        dataset,
        eligible,
        tables,
        config.ga_config(),
        workers=config.workers,
        progress=progress,
    )
    chosen = decide(archive, DecisionConfig())
    fitness = next(fit for genome, fit in archive.members if genome == chosen)

    masks = evaluation.set_masks(dataset, chosen)
    report = {
        "n_requests": dataset.n_requests,
        "n_positives": int(np.count_nonzero(dataset.positives_mask())),
        "n_negatives": int(np.count_nonzero(~dataset.positives_mask())),
        "slo": dataset.slo,
        "set": {
            "precision": fitness.precision,
            "recall": fitness.recall,
            "f1": fitness.f1(),
            # None instead of +inf keeps the report strict JSON
            "dissimilarity": fitness.dissimilarity
            if np.isfinite(fitness.dissimilarity)
            else None,
        },
        "patterns": evaluation.pattern_slo_metrics(masks, dataset),
        "overlap": evaluation.overlap_of_masks(masks),
        "archive_size": len(archive),
        "eligible_values": search_space.eligible_to_dict(eligible, dataset.schema),
    }
    return DetectResult(chosen, fitness, len(archive), report)


def patterns_payload(result: DetectResult, dataset: Dataset) -> dict:
    return pattern_set_to_dict(result.pattern_set, dataset.schema)


# ---------------------------------------------------------------------------
# Multi-run scoring against ground truth
# ---------------------------------------------------------------------------


def _iqr(values: Sequence[float]) -> float:
    return float(np.percentile(values, 75) - np.percentile(values, 25))


def evaluate_runs(
    dataset: Dataset,
    technique: str,
    runs: int,
    seed: int,
    run_config: RunConfig = RunConfig(),
    pattern_set: Optional[PatternSet] = None,
) -> dict:
    """Score a technique ``runs`` times with seeds seed..seed+runs-1.

    Techniques: ``patterns`` (score a given set once per run seed, which is
    deterministic), ``detect`` (full pipeline), ``kmeans`` (baseline).
    """
    rows = []
    for r in range(runs):
        run_seed = seed + r
        if technique == "patterns":
            if pattern_set is None:
                raise LagmineError("technique 'patterns' needs a pattern set")
            report = evaluation.quality(pattern_set, dataset)
        elif technique == "detect":
            result = detect(dataset, replace(run_config, seed=run_seed))
            report = evaluation.quality(result.pattern_set, dataset)
        elif technique == "kmeans":
            _, report, _ = evaluation.kmeans_baseline(dataset, seed=run_seed)
        else:
            raise LagmineError(f"unknown technique {technique!r}")
        rows.append(report)

    overlaps = [row.overlap for row in rows if row.overlap is not None]
    return {
        "technique": technique,
        "runs": runs,
        "mean_q_prec": float(np.mean([row.q_prec for row in rows])),
        "mean_q_rec": float(np.mean([row.q_rec for row in rows])),
        "mean_q_f1": float(np.mean([row.q_f1 for row in rows])),
        "iqr_q_f1": _iqr([row.q_f1 for row in rows]),
        "overlap": float(np.mean(overlaps)) if overlaps else None,
        "per_pattern": list(rows[0].per_pattern),
        "runs_detail": [row.to_dict() for row in rows],
    }


# ---------------------------------------------------------------------------
# Sweep suites
# ---------------------------------------------------------------------------

SUITES = ("rq1", "rq2-distance", "rq3-noncritical")

#: The five latency-distance setups of the distance grid, as
#: (first-issue fraction, second-issue fraction) of the baseline latency.
DISTANCE_SETUPS = (
    (0.3, 0.3),
    (0.275, 0.325),
    (0.25, 0.35),
    (0.225, 0.375),
    (0.2, 0.4),
)

#: Non-critical delay fractions of the non-critical grid.
NONCRITICAL_SETUPS = (0.0, 0.1, 0.2, 0.3, 0.4)


def suite_scenarios(
    suite: str,
    topology: tuple,
    scenarios: int,
    n_requests: int,
    seed: int,
    noncritical_fractions: Optional[Sequence[float]] = None,
) -> list[tuple[str, ScenarioConfig]]:
    """The (setup name, scenario config) grid for one sweep suite."""
    if scenarios < 1:
        raise LagmineError("sweep needs at least one scenario per setup")
    rng = np.random.default_rng(seed)

    def scenario_seed() -> int:
        return int(rng.integers(2**63))

    out: list[tuple[str, ScenarioConfig]] = []
    if suite == "rq1":
        for _ in range(scenarios):
            out.append(
                (
                    "random",
                    ScenarioConfig(
                        topology=topology,
                        n_requests=n_requests,
                        delay_fraction_range=(0.2, 0.4),
                        min_distance_fraction=0.1,
                        noncritical_delay_fraction=float(rng.uniform(0.2, 0.4)),
                        rng_seed=scenario_seed(),
                    ),
                )
            )
    elif suite == "rq2-distance":
        for f1, f2 in DISTANCE_SETUPS:
            for _ in range(scenarios):
                out.append(
                    (
                        f"distance_{abs(f2 - f1):.3f}",
                        ScenarioConfig(
                            topology=topology,
                            n_requests=n_requests,
                            delay_fractions=(f1, f2),
                            noncritical_delay_fraction=0.3,
                            rng_seed=scenario_seed(),
                        ),
                    )
                )
    elif suite == "rq3-noncritical":
        fractions = (
            NONCRITICAL_SETUPS
            if noncritical_fractions is None
            else tuple(noncritical_fractions)
        )
        for nc in fractions:
            for _ in range(scenarios):
                out.append(
                    (
                        f"noncritical_{nc:.1f}",
                        ScenarioConfig(
                            topology=topology,
                            n_requests=n_requests,
                            delay_fractions=(0.25, 0.35),
                            noncritical_delay_fraction=nc,
                            rng_seed=scenario_seed(),
                        ),
                    )
                )
    else:
        raise LagmineError(f"unknown suite {suite!r}; known: {SUITES}")
    return out


def run_sweep(
    suite: str,
    topology: tuple,
    scenarios: int,
    runs: int,
    seed: int,
    n_requests: int = 2500,
    run_config: RunConfig = RunConfig(),
    techniques: Sequence[str] = ("detect", "kmeans"),
    noncritical_fractions: Optional[Sequence[float]] = None,
    progress: Optional[TextIO] = None,
) -> dict:
    """Generate every scenario, run each technique, aggregate per setup."""
    grid = suite_scenarios(
        suite, topology, scenarios, n_requests, seed, noncritical_fractions
    )
    rows = []
    for index, (setup, cfg) in enumerate(grid):
        dataset, manifest = scenario.generate(cfg)
        for technique in techniques:
            agg = evaluate_runs(dataset, technique, runs, seed, run_config)
            rows.append(
                {
                    "suite": suite,
                    "setup": setup,
                    "scenario": index,
                    "scenario_seed": cfg.rng_seed,
                    "l_mu": manifest["l_mu"],
                    "technique": technique,
                    "runs": runs,
                    "mean_q_prec": agg["mean_q_prec"],
                    "mean_q_rec": agg["mean_q_rec"],
                    "mean_q_f1": agg["mean_q_f1"],
                    "iqr_q_f1": agg["iqr_q_f1"],
                    "overlap": agg["overlap"],
                }
            )
            if progress is not None:
                progress.write(
                    f"{suite}\t{setup}\t{index}\t{technique}\t"
                    f"{agg['mean_q_f1']:.4f}\n"
                )

    summary = []
    for setup in dict.fromkeys(r["setup"] for r in rows):
        for technique in techniques:
            f1s = [
                r["mean_q_f1"]
                for r in rows
                if r["setup"] == setup and r["technique"] == technique
            ]
            summary.append(
                {
                    "suite": suite,
                    "setup": setup,
                    "technique": technique,
                    "scenarios": len(f1s),
                    "mean_q_f1": float(np.mean(f1s)),
                    "iqr_q_f1": _iqr(f1s),
                }
            )
    return {"rows": rows, "summary": summary}
