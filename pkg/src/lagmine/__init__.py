"""Latency degradation pattern mining for distributed-trace datasets.

Finds sets of per-RPC execution-time range patterns that explain
SLO-violating request latency, via a three-objective evolutionary search
over bit-table-backed fitness evaluation, plus a synthetic scenario
generator and an evaluation harness.
"""

from .decision import DecisionConfig, decide, f_beta
from .errors import LagmineError
from .harness import DetectResult, RunConfig, detect
from .ingest import load_csv, load_spans, write_csv
from .kernels import BACKEND as KERNEL_BACKEND
from .model import (
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
from .nsga import GaConfig, ParetoArchive
from .objectives import FitnessTriple
from .scenario import ScenarioConfig, estimate_baseline_latency, generate
from .search_space import EligibleValues, build_search_space

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DecisionConfig",
    "DetectResult",
    "EligibleValues",
    "FitnessTriple",
    "GaConfig",
    "KERNEL_BACKEND",
    "LagmineError",
    "ParetoArchive",
    "Pattern",
    "PatternSet",
    "Predicate",
    "Request",
    "RunConfig",
    "ScenarioConfig",
    "build_search_space",
    "decide",
    "detect",
    "estimate_baseline_latency",
    "f_beta",
    "generate",
    "load_csv",
    "load_spans",
    "pattern_set_from_dict",
    "pattern_set_to_dict",
    "satisfies_pattern",
    "satisfies_predicate",
    "satisfies_set",
    "write_csv",
]
