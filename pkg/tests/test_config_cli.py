"""Configuration parsing and the command-line front end."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from longsurrogate.cli import build_parser, main
from longsurrogate.config import load_config, parse_config
from longsurrogate.errors import ConfigError
from longsurrogate.panel import load_panel

GOLDEN = Path(__file__).parent / "golden"

SIMULATE = """
seed = 3
[data.synth]
kind = "stabilized1"
n_per_arm = 300
t_total = 6
t_experimental = 2
"""

BENCH = """
seed = 1
[bench]
kind = "stabilized1"
n_seeds = 2
t_experimental = [2, 3]
t_total = 6
n_per_arm = 200
replicas = 3
estimators = ["lsm", "ceb", "var"]
gammas = [1.0, 2.0]
[bench.parallel_trends]
n_per_arm = 300
n_bins = 3
"""


def schema(value):
    """Key layout and leaf types of a JSON document, lists collapsed to one element."""
    if isinstance(value, dict):
        return {k: schema(v) for k, v in sorted(value.items())}
    if isinstance(value, list):
        return [schema(value[0])] if value else []
    if value is None:
        return "null"
    return type(value).__name__


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(tmp_path, command, text, *extra):
    cfg = write(tmp_path, text)
    out = tmp_path / command
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


class TestConfig:
    def test_seed_is_mandatory(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config({})

    def test_overrides_win_and_none_ignored(self, tmp_path):
        cfg = load_config(write(tmp_path, "seed = 1\nthreads = 2\n"),
                          {"seed": 9, "threads": None})
        assert cfg.seed == 9 and cfg.threads == 2

    def test_threads_not_echoed(self):
        cfg = parse_config({"seed": 1, "threads": 4, "out": "x"})
        assert cfg.effective() == {"seed": 1, "rng": "philox"}

    @pytest.mark.parametrize("raw", [
        {"seed": -1},
        {"seed": 1.5},
        {"seed": True},
        {"seed": 1, "colour": "red"},
        {"seed": 1, "rng": "mt19937"},
        {"seed": 1, "threads": 0},
        {"seed": 1, "data": {"path": "a.csv", "synth": {}}},
        {"seed": 1, "window": {"t_experimental": 4, "t_total": 4}},
        {"seed": 1, "window": {"t_experimental": 1}},
        {"seed": 1, "window": {"horizon": 4}},
        {"seed": 1, "inference": {"method": "jackknife"}},
    ])
    def test_rejected(self, raw):
        with pytest.raises(ConfigError):
            parse_config(raw)

    def test_bad_toml(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config(write(tmp_path, "seed = = 1"))


class TestExitCodes:
    def test_missing_seed(self, tmp_path, capsys):
        code, _ = run(tmp_path, "simulate", SIMULATE.replace("seed = 3", ""))
        assert code == 2 and "seed" in capsys.readouterr().err

    def test_window_violation(self, tmp_path):
        code, _ = run(tmp_path, "estimate", SIMULATE + "[window]\nt_experimental = 6\n"
                      "t_total = 6\n")
        assert code == 2

    def test_missing_data_file(self, tmp_path, capsys):
        text = "seed = 1\n[data]\npath = 'nope.csv'\n[window]\nt_experimental = 2\nt_total = 4\n"
        code, _ = run(tmp_path, "estimate", text)
        assert code == 3 and "error:" in capsys.readouterr().err

    def test_estimation_failure(self, tmp_path):
        text = SIMULATE.replace("n_per_arm = 300", "n_per_arm = 3") + \
            '[estimate]\nestimators = ["discrete"]\n[estimate.options.discrete]\n' \
            'n_bins = 8\nzero_support = "abort"\n'
        code, _ = run(tmp_path, "estimate", text)
        assert code == 4

    def test_missing_config_file(self, tmp_path):
        assert main(["estimate", "--config", str(tmp_path / "x.toml")]) == 2

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "longsurrogate", "--help"],
                             capture_output=True, text=True)
        assert res.returncode == 0
        for command in ("simulate", "estimate", "validate", "bench", "report"):
            assert command in res.stdout


class TestCommands:
    def test_simulate_round_trip(self, tmp_path):
        code, out = run(tmp_path, "simulate", SIMULATE)
        assert code == 0
        spec = json.loads((out / "panel.spec.json").read_text())
        ds = load_panel(out / "panel.csv", (2, 6))
        assert ds.n_units == 600 and spec["spec"]["kind"] == "stabilized1"

    def test_estimate_report(self, tmp_path):
        text = SIMULATE + '[inference]\nmethod = "subsample_bootstrap"\nreplicas = 10\n'
        code, out = run(tmp_path, "estimate", text)
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert set(report) == {"config", "trajectories", "metrics", "validation", "timings",
                               "provenance"}
        assert report["timings"] == {"file": "timings.json"}
        assert report["config"]["seed"] == 3
        assert set(report["trajectories"]) == {"lsm", "ceb", "var"}
        assert report["metrics"]["lsm"]["bias"] <= 0.05
        assert (out / "trajectory_lsm.csv").exists() and (out / "timings.json").exists()
        lsm = report["trajectories"]["lsm"]
        assert lsm["band"]["method"] == "subsample_bootstrap"

    def test_seed_flag_overrides(self, tmp_path):
        _, a = run(tmp_path, "estimate", SIMULATE, "--seed", "4")
        report = json.loads((a / "report.json").read_text())
        assert report["config"]["seed"] == 4

    def test_dump_replicates(self, tmp_path):
        text = SIMULATE + '[inference]\nmethod = "permutation"\nreplicas = 5\n'
        code, out = run(tmp_path, "estimate", text, "--dump-replicates")
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        perm = report["trajectories"]["lsm"]["permutation"]
        assert len(perm["replicate_statistics"]) == 5 and 0 <= perm["p_value"] <= 1

    def test_validate_outputs(self, tmp_path):
        text = SIMULATE.replace("stabilized1", "no_effect") + \
            "[validation]\nn_bins = 3\nbalance = true\ntheta_grid = [0.0, 0.5]\n" \
            "comparability = [{t = 1, t_prime = 2, delta = 1}]\n" \
            "parallel_trends = [{t = 1, t_prime = 2, delta = 1}]\n"
        code, out = run(tmp_path, "validate", text)
        assert code == 0
        report = json.loads((out / "validation.json").read_text())
        val = report["validation"]
        assert {"balance", "comparability", "parallel_trends", "sensitivity"} <= set(val)
        assert (out / "validation.csv").read_text().startswith("group,t,t_prime")

    def test_report_merges(self, tmp_path):
        _, a = run(tmp_path, "estimate", SIMULATE)
        out = tmp_path / "merged"
        assert main(["report", str(a / "report.json"), "--out", str(out)]) == 0
        merged = json.loads((out / "merged_report.json").read_text())
        assert set(merged) == {"config", "trajectories", "metrics", "validation", "timings",
                               "provenance"}
        assert list(merged["metrics"]) == ["report"]

    def test_nan_becomes_null(self, tmp_path):
        code, out = run(tmp_path, "estimate", SIMULATE)
        text = (out / "report.json").read_text()
        assert "NaN" not in text and code == 0


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bench")
    code, out = run(tmp, "bench", BENCH)
    assert code == 0
    return out


class TestBenchSchema:
    def test_json_schema_is_stable(self, bench):
        got = schema(json.loads((bench / "bench.json").read_text()))
        expected = json.loads((GOLDEN / "bench_schema.json").read_text())
        assert got == expected

    def test_csv_header_and_rows(self, bench):
        lines = (bench / "bench.csv").read_text().splitlines()
        assert lines[0] == "estimator,t_experimental,n_seeds,bias,signed_bias,mse"
        assert len(lines) == 1 + 3 * 2

    def test_table_aggregates_per_seed(self, bench):
        doc = json.loads((bench / "bench.json").read_text())
        per_seed = doc["metrics"]["per_seed"]["lsm"]["2"]
        row = next(r for r in doc["metrics"]["table"]
                   if r["estimator"] == "lsm" and r["t_experimental"] == 2)
        assert row["bias"] == pytest.approx(np.mean([m["bias"] for m in per_seed]))


class TestParser:
    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["estimate", "--config", "a.toml", "--threads", "2"])
        assert args.command == "estimate" and args.threads == 2
        args = parser.parse_args(["report", "a.json", "b.json"])
        assert args.inputs == ["a.json", "b.json"]
