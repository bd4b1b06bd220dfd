from __future__ import annotations

import csv
import json

import pytest

from lagmine.cli import main
from lagmine.ingest import write_csv
from lagmine.scenario import ESHOPPER_LIKE, ScenarioConfig, generate


@pytest.fixture(scope="module")
def small_dataset_csv(tmp_path_factory):
    config = ScenarioConfig(
        topology=ESHOPPER_LIKE,
        n_requests=600,
        delay_fractions=(0.25, 0.35),
        noncritical_delay_fraction=0.2,
        baseline_probe=500,
        rng_seed=42,
    )
    dataset, _ = generate(config)
    path = tmp_path_factory.mktemp("data") / "scenario.csv"
    write_csv(dataset, path)
    return path


FAST = ["--pop", "12", "--gens", "15", "--workers", "1"]


class TestDetect:
    def test_writes_artifacts(self, small_dataset_csv, tmp_path):
        out = tmp_path / "run"
        code = main(
            ["detect", "--input", str(small_dataset_csv), "--slo", "auto",
             "--seed", "42", "--out", str(out), *FAST]
        )
        assert code == 0
        patterns = json.loads((out / "patterns.json").read_text())
        assert patterns["patterns"], "at least one pattern expected"
        for pattern in patterns["patterns"]:
            for pred in pattern["predicates"]:
                assert set(pred) == {"rpc", "min", "max"}
        report = json.loads((out / "report.json").read_text())
        assert report["n_positives"] > 0
        assert len(report["patterns"]) == len(patterns["patterns"])
        for entry in report["patterns"]:
            assert {"precision", "recall", "f1", "matched_requests"} <= set(entry)
        config = json.loads((out / "run_config.json").read_text())
        assert config["seed"] == 42 and config["generations"] == 15

    def test_rerun_byte_identical(self, small_dataset_csv, tmp_path):
        args = ["detect", "--input", str(small_dataset_csv), "--slo", "auto",
                "--seed", "7", *FAST]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "patterns.json").read_bytes() == (out2 / "patterns.json").read_bytes()
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()

    def test_degenerate_dataset_exit_2(self, tmp_path):
        path = tmp_path / "quiet.csv"
        path.write_text("A,Latency\n1,10\n2,20\n", encoding="utf-8")
        out = tmp_path / "out"
        code = main(["detect", "--input", str(path), "--slo", "999",
                     "--out", str(out), *FAST])
        assert code == 2
        assert not (out / "patterns.json").exists()

    def test_span_json_input(self, tmp_path):
        # 40 traces; slow ones carry a long db⋄query span
        spans = []
        for t in range(40):
            slow = t % 4 == 0
            spans.append(
                {"traceID": f"t{t}", "spanID": f"r{t}", "operationName": "web⋄home",
                 "duration": 900_000 if slow else 100_000}
            )
            spans.append(
                {"traceID": f"t{t}", "spanID": f"c{t}", "operationName": "db⋄query",
                 "duration": 700_000 if slow else 50_000,
                 "references": [{"refType": "CHILD_OF", "spanID": f"r{t}"}]}
            )
        path = tmp_path / "spans.json"
        path.write_text(json.dumps(spans), encoding="utf-8")
        out = tmp_path / "run"
        code = main(["detect", "--input", str(path), "--slo", "500",
                     "--seed", "1", "--out", str(out), *FAST])
        assert code == 0
        patterns = json.loads((out / "patterns.json").read_text())
        rpcs = {p["rpc"] for pat in patterns["patterns"] for p in pat["predicates"]}
        assert rpcs == {"db⋄query"}

    def test_missing_input_exit_1(self, tmp_path):
        code = main(["detect", "--input", str(tmp_path / "nope.csv"),
                     "--slo", "10", "--out", str(tmp_path / "o"), *FAST])
        assert code == 1

    def test_bad_csv_exit_1(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("A,B\n1,2\n", encoding="utf-8")
        code = main(["detect", "--input", str(path), "--slo", "10",
                     "--out", str(tmp_path / "o"), *FAST])
        assert code == 1


class TestGenerate:
    def _config_file(self, tmp_path, **overrides):
        payload = {
            "topology": "eshopper",
            "n_requests": 300,
            "baseline_probe": 300,
            "delay_fractions": [0.25, 0.35],
            "rng_seed": 5,
        }
        payload.update(overrides)
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    def test_writes_dataset_and_manifest(self, tmp_path):
        config = self._config_file(tmp_path)
        out = tmp_path / "gen"
        assert main(["generate", "--config", str(config), "--out", str(out)]) == 0
        with (out / "dataset.csv").open() as fh:
            header = next(csv.reader(fh))
        assert header[-2:] == ["Latency", "ADC"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["adcs"]) == 2
        assert manifest["config"]["rng_seed"] == 5

    def test_seed_override(self, tmp_path):
        config = self._config_file(tmp_path)
        out1, out2, out3 = (tmp_path / n for n in ("g1", "g2", "g3"))
        main(["generate", "--config", str(config), "--out", str(out1)])
        main(["generate", "--config", str(config), "--out", str(out2), "--seed", "9"])
        main(["generate", "--config", str(config), "--out", str(out3), "--seed", "9"])
        assert (out1 / "dataset.csv").read_bytes() != (out2 / "dataset.csv").read_bytes()
        assert (out2 / "dataset.csv").read_bytes() == (out3 / "dataset.csv").read_bytes()

    def test_invalid_config_exit_1(self, tmp_path):
        config = self._config_file(tmp_path, n_requests=0)
        assert main(["generate", "--config", str(config), "--out", str(tmp_path / "x")]) == 1


class TestEvaluate:
    def test_patterns_technique(self, small_dataset_csv, tmp_path):
        run_dir = tmp_path / "run"
        main(["detect", "--input", str(small_dataset_csv), "--slo", "auto",
              "--seed", "3", "--out", str(run_dir), *FAST])
        out = tmp_path / "eval"
        code = main(["evaluate", "--input", str(small_dataset_csv),
                     "--patterns", str(run_dir / "patterns.json"),
                     "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "quality.json").read_text())
        assert {"technique", "runs", "mean_q_prec", "mean_q_rec", "mean_q_f1",
                "iqr_q_f1", "overlap", "per_pattern"} <= set(payload)
        assert payload["technique"] == "patterns"
        rows = list(csv.DictReader((out / "quality.csv").open()))
        assert len(rows) == 1

    def test_kmeans_multi_run(self, small_dataset_csv, tmp_path):
        out = tmp_path / "eval"
        code = main(["evaluate", "--input", str(small_dataset_csv),
                     "--technique", "kmeans", "--runs", "3",
                     "--seed", "1", "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "quality.json").read_text())
        assert payload["runs"] == 3
        assert len(payload["runs_detail"]) == 3

    def test_detect_technique_runs_with_distinct_seeds(self, small_dataset_csv, tmp_path):
        out = tmp_path / "eval"
        code = main(["evaluate", "--input", str(small_dataset_csv),
                     "--technique", "detect", "--runs", "2",
                     "--seed", "11", "--out", str(out), *FAST])
        assert code == 0
        payload = json.loads((out / "quality.json").read_text())
        assert payload["runs"] == 2

    def test_patterns_flag_required(self, small_dataset_csv, tmp_path):
        code = main(["evaluate", "--input", str(small_dataset_csv),
                     "--out", str(tmp_path / "e")])
        assert code == 1


class TestSweep:
    def test_small_sweep_outputs(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(["sweep", "--suite", "rq3-noncritical", "--scenarios", "1",
                     "--runs", "1", "--seed", "2", "--requests", "400",
                     "--technique", "kmeans", "--out", str(out),
                     *FAST])
        assert code == 0
        rows = list(csv.DictReader((out / "scenarios.csv").open()))
        assert len(rows) == 5  # five setups x 1 scenario x 1 technique
        assert {row["setup"] for row in rows} == {
            "noncritical_0.0", "noncritical_0.1", "noncritical_0.2",
            "noncritical_0.3", "noncritical_0.4",
        }
        summary = list(csv.DictReader((out / "summary.csv").open()))
        assert len(summary) == 5
        config = json.loads((out / "sweep_config.json").read_text())
        assert config["suite"] == "rq3-noncritical"

    def test_zero_scenarios_rejected(self, tmp_path):
        code = main(["sweep", "--suite", "rq1", "--scenarios", "0",
                     "--out", str(tmp_path / "s"), *FAST])
        assert code == 1

    def test_reproducible_at_fixed_seed(self, tmp_path):
        args = ["sweep", "--suite", "rq2-distance", "--scenarios", "1",
                "--runs", "1", "--seed", "4", "--requests", "300",
                "--technique", "kmeans", *FAST]
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "scenarios.csv").read_bytes() == (out2 / "scenarios.csv").read_bytes()
