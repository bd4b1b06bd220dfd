"""Command-line entry point.

Subcommands: ``detect`` (find patterns in a dataset), ``generate`` (emit a
synthetic labeled dataset), ``evaluate`` (score a technique against ground
truth), ``sweep`` (run a whole experiment suite).  Exit codes: 0 success,
1 error, 2 degenerate-but-valid analysis (nothing violates the SLO).

Every flag is recorded in the output directory; the only environment
variable honored is ``LAGMINE_WORKERS`` as a worker-count default.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import harness, ingest, scenario
from .errors import DegenerateAnalysisError, LagmineError
from .harness import RunConfig
from .model import Dataset, pattern_set_from_dict


def _default_workers() -> int:
    env = os.environ.get("LAGMINE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _slo_value(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--slo must be a number or 'auto', got {text!r}")


def _add_ga_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="search RNG seed")
    parser.add_argument("--pop", type=int, default=30, help="population size")
    parser.add_argument("--gens", type=int, default=300, help="generations")
    parser.add_argument("--pc", type=float, default=0.6, help="crossover probability")
    parser.add_argument("--pm", type=float, default=0.4, help="mutation probability")
    parser.add_argument(
        "--min-recall", type=float, default=0.05, help="pattern recall penalty threshold"
    )
    parser.add_argument(
        "--cluster-frac", type=float, default=0.05, help="discard clusters below this fraction of positives"
    )
    parser.add_argument(
        "--bw-quantile", type=float, default=0.3, help="bandwidth estimation quantile"
    )
    parser.add_argument("--workers", type=int, default=_default_workers())


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        seed=args.seed,
        population=args.pop,
        generations=args.gens,
        p_crossover=args.pc,
        p_mutation=args.pm,
        min_pattern_recall=args.min_recall,
        cluster_fraction=args.cluster_frac,
        bandwidth_quantile=args.bw_quantile,
        workers=args.workers,
    )


def _load_dataset(path: str, slo) -> Dataset:
    if Path(path).suffix.lower() == ".json":
        return ingest.load_spans(path, slo)
    return ingest.load_csv(path, slo)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv_rows(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def cmd_detect(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.input, args.slo)
    config = _run_config(args)
    progress = sys.stderr if args.progress else None
    result = harness.detect(dataset, config, progress=progress)

    out = Path(args.out)
    _write_json(out / "patterns.json", harness.patterns_payload(result, dataset))
    _write_json(out / "report.json", result.report)
    _write_json(
        out / "run_config.json",
        {"input": args.input, "slo": args.slo, **config.to_dict()},
    )
    print(f"wrote {out / 'patterns.json'} ({result.pattern_set.size} patterns)")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    with open(args.config, encoding="utf-8") as fh:
        config = scenario.config_from_dict(json.load(fh))
    if args.seed is not None:
        config = scenario.with_seed(config, args.seed)
    dataset, manifest = scenario.generate(config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ingest.write_csv(dataset, out / "dataset.csv")
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {out / 'dataset.csv'} ({dataset.n_requests} requests)")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.input, args.slo)
    out = Path(args.out)

    if args.technique == "patterns":
        if not args.patterns:
            raise LagmineError("--patterns is required with --technique patterns")
        with open(args.patterns, encoding="utf-8") as fh:
            pattern_set = pattern_set_from_dict(json.load(fh), dataset.schema)
        payload = harness.evaluate_runs(
            dataset, "patterns", args.runs, args.seed, pattern_set=pattern_set
        )
    else:
        payload = harness.evaluate_runs(
            dataset, args.technique, args.runs, args.seed, _run_config(args)
        )

    payload["dataset"] = args.input
    _write_json(out / "quality.json", payload)
    _write_csv_rows(
        out / "quality.csv",
        [
            {
                "dataset": args.input,
                "technique": payload["technique"],
                "run": i,
                "q_prec": detail["q_prec"],
                "q_rec": detail["q_rec"],
                "q_f1": detail["q_f1"],
                "overlap": detail["overlap"],
            }
            for i, detail in enumerate(payload["runs_detail"])
        ],
    )
    print(
        f"{payload['technique']}: mean Q_F1 {payload['mean_q_f1']:.4f} "
        f"(IQR {payload['iqr_q_f1']:.4f}) over {payload['runs']} run(s)"
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.scenarios < 1:
        raise LagmineError("--scenarios must be at least 1")
    topology = scenario.TOPOLOGIES[args.topology]
    result = harness.run_sweep(
        suite=args.suite,
        topology=topology,
        scenarios=args.scenarios,
        runs=args.runs,
        seed=args.seed,
        n_requests=args.requests,
        run_config=_run_config(args),
        techniques=tuple(args.technique),
        progress=sys.stderr if args.progress else None,
    )
    out = Path(args.out)
    _write_csv_rows(out / "scenarios.csv", result["rows"])
    _write_csv_rows(out / "summary.csv", result["summary"])
    _write_json(
        out / "sweep_config.json",
        {
            "suite": args.suite,
            "topology": args.topology,
            "scenarios": args.scenarios,
            "runs": args.runs,
            "seed": args.seed,
            "requests": args.requests,
            "techniques": list(args.technique),
            **_run_config(args).to_dict(),
        },
    )
    for row in result["summary"]:
        print(
            f"{row['setup']:<18} {row['technique']:<8} "
            f"mean Q_F1 {row['mean_q_f1']:.4f}  IQR {row['iqr_q_f1']:.4f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lagmine",
        description="Detect latency degradation patterns in request traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="search a dataset for patterns")
    p.add_argument("--input", required=True, help="CSV dataset or span-export JSON")
    p.add_argument("--slo", type=_slo_value, required=True, help="latency SLO in ms, or 'auto'")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--progress", action="store_true", help="per-generation telemetry on stderr")
    _add_ga_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("generate", help="generate a synthetic labeled dataset")
    p.add_argument("--config", required=True, help="scenario config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score a technique against ground truth")
    p.add_argument("--input", required=True, help="labeled CSV dataset")
    p.add_argument("--slo", type=_slo_value, default="auto")
    p.add_argument("--patterns", help="patterns JSON (with --technique patterns)")
    p.add_argument(
        "--technique",
        choices=("patterns", "detect", "kmeans"),
        default="patterns",
    )
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_ga_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run a whole experiment suite")
    p.add_argument("--suite", choices=harness.SUITES, required=True)
    p.add_argument("--scenarios", type=int, default=5, help="scenarios per setup")
    p.add_argument("--runs", type=int, default=3, help="runs per scenario")
    p.add_argument("--topology", choices=sorted(scenario.TOPOLOGIES), default="eshopper")
    p.add_argument("--requests", type=int, default=2500, help="requests per scenario")
    p.add_argument(
        "--technique",
        action="append",
        choices=("detect", "kmeans"),
        default=None,
        help="repeatable; default: detect and kmeans",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--progress", action="store_true")
    _add_ga_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "technique", None) is None and args.command == "sweep":
        args.technique = ["detect", "kmeans"]
    try:
        return args.func(args)
    except DegenerateAnalysisError as exc:
        print(f"degenerate analysis: {exc}", file=sys.stderr)
        return 2
    except (LagmineError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
