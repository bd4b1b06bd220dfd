"""Benchmark the compiled bit kernels against the numpy fallback.

Times the operations on the fitness hot path (predicate evaluation,
pattern AND-reduction, popcount, masked latency moments) and a full
pattern-set evaluation, on bit vectors sized like real datasets.

Usage: python benchmarks/bench_kernels.py [--bits 100000] [--repeat 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lagmine import _kernels_py
from lagmine.kernels import n_words, pack_bits

try:
    from lagmine import _kernels

    BACKENDS = {"python": _kernels_py, "compiled": _kernels}
except ImportError:
    BACKENDS = {"python": _kernels_py}


def _time(fn, repeat: int) -> float:
    fn()  # warmup
    started = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - started) / repeat


def bench(n_bits: int, repeat: int) -> None:
    rng = np.random.default_rng(0)
    table = np.stack([pack_bits(rng.random(n_bits) < 0.5) for _ in range(8)])
    values = rng.uniform(0, 1000, n_bits)
    lo = np.array([0, 2, 4], dtype=np.int64)
    hi = np.array([1, 3, 5], dtype=np.int64)
    out = np.zeros(n_words(n_bits), dtype=np.uint64)
    acc = np.zeros(n_words(n_bits), dtype=np.uint64)

    cases = {
        "and_not": lambda impl: impl.and_not(table[0], table[1], out),
        "or_inplace": lambda impl: impl.or_inplace(acc, table[0]),
        "pattern_bits(3 preds)": lambda impl: impl.pattern_bits(table, lo, hi, out),
        "popcount": lambda impl: impl.popcount(table[0]),
        "masked_moments": lambda impl: impl.masked_moments(table[0], values),
    }

    print(f"bit length {n_bits} ({n_words(n_bits)} words), {repeat} reps\n")
    header = f"{'operation':<24}" + "".join(f"{name:>14}" for name in BACKENDS)
    if len(BACKENDS) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name, case in cases.items():
        times = {
            backend: _time(lambda impl=impl: case(impl), repeat)
            for backend, impl in BACKENDS.items()
        }
        row = f"{name:<24}" + "".join(
            f"{times[backend] * 1e6:>12.1f}us" for backend in BACKENDS
        )
        if len(times) == 2:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)

    _bench_full_evaluation(repeat)


def _bench_full_evaluation(repeat: int) -> None:
    """A realistic end-to-end fitness evaluation over a generated scenario."""
    import os

    from lagmine import bitset, scenario
    from lagmine.nsga import GaConfig, init_population
    from lagmine.objectives import FitnessEvaluator
    from lagmine.search_space import build_search_space

    dataset, _ = scenario.generate(
        scenario.ScenarioConfig(
            topology=scenario.ESHOPPER_LIKE,
            n_requests=10_000,
            delay_fractions=(0.25, 0.35),
            noncritical_delay_fraction=0.3,
            rng_seed=0,
        )
    )
    eligible = build_search_space(dataset)
    tables = bitset.precompute(dataset, eligible)
    population = init_population(
        GaConfig(population_size=30), eligible, np.random.default_rng(0)
    )

    print("\nfull evaluation of a 30-individual population, 10k requests")
    # swapping the backend in place retargets every module that did
    # `from . import kernels`, since reload mutates the module object
    import importlib

    import lagmine.kernels

    for backend in BACKENDS:
        os.environ["LAGMINE_KERNELS"] = "python" if backend == "python" else ""
        importlib.reload(lagmine.kernels)
        evaluator = FitnessEvaluator(tables, dataset)

        def evaluate_population():
            evaluator.clear_memo()
            for ind in population:
                evaluator.evaluate(ind.genome)

        per_call = _time(evaluate_population, max(10, repeat // 10))
        print(f"{backend:<12}{per_call * 1e3:>10.2f} ms per generation")
    os.environ.pop("LAGMINE_KERNELS", None)
    importlib.reload(lagmine.kernels)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--bits", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    bench(args.bits, args.repeat)
