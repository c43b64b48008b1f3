"""End-to-end tests of the command line interface and the run pipeline."""

import json
from pathlib import Path

import numpy as np
import pytest

from driftmc.cli import main

TINY_CONFIG = {
    "model": {"tag": "black_scholes", "n": 2, "seed": 1},
    "payoff": {"moneyness": 1.05},
    "grid": {"horizon": 1.0, "dt": 1.0 / 16},
    "training": {"epochs": 1, "steps_per_epoch": 5, "batch_size": 32,
                 "smooth_window": 2, "seed": 3},
    "estimation": {"sample_sizes": [400, 800], "seed": 7,
                   "block_size": 128},
}


def write_config(tmp_path, overrides=None, name="config.json"):
    cfg = json.loads(json.dumps(TINY_CONFIG))
    for key, value in (overrides or {}).items():
        cfg.setdefault(key, {}).update(value)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run_artifacts(out_dir):
    return sorted(p.name for p in Path(out_dir).iterdir())


class TestValidateCommand:
    def test_sampled_config_validates(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["validate", "--config", str(cfg)]) == 0

    def test_invalid_explicit_params_exit_code(self, tmp_path, capsys):
        cfg = {
            "model": {"tag": "black_scholes", "n": 1,
                      "params": {"mu": [0.05], "sigma": [[0.2]], "s0": [-1.0]}},
            "payoff": {"strike": 1.0, "weights": [1.0]},
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg))
        assert main(["validate", "--config", str(path)]) == 4
        assert "s0" in capsys.readouterr().out

    def test_malformed_config_exit_code(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{ not json")
        assert main(["validate", "--config", str(path)]) == 2

    def test_unknown_field_exit_code(self, tmp_path):
        path = tmp_path / "odd.json"
        path.write_text(json.dumps({"modle": {}}))
        assert main(["validate", "--config", str(path)]) == 2


class TestSampleParamsCommand:
    def test_prints_parameters(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["sample-params", "--config", str(cfg)]) == 0
        block = json.loads(capsys.readouterr().out)
        assert block["tag"] == "black_scholes"
        assert len(block["params"]["mu"]) == 2

    def test_seed_override_changes_draw(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        main(["sample-params", "--config", str(cfg)])
        first = capsys.readouterr().out
        main(["sample-params", "--config", str(cfg), "--seed", "99"])
        second = capsys.readouterr().out
        assert first != second


class TestPriceCommands:
    def test_price_report_json(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "report.json"
        assert main(["price", "--config", str(cfg), "--n", "500",
                     "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["measure"] == "P"
        assert report["n"] == 500

    def test_train_then_price_is_and_compare(self, tmp_path):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "artifacts"
        assert main(["train", "--config", str(cfg), "--out-dir",
                     str(out_dir)]) == 0
        checkpoint = out_dir / "checkpoint.json"
        assert checkpoint.exists()
        assert (out_dir / "training_trace.csv").exists()

        mc_file = tmp_path / "mc.json"
        is_file = tmp_path / "is.json"
        assert main(["price", "--config", str(cfg), "--n", "400",
                     "--seed", "7", "--out", str(mc_file)]) == 0
        assert main(["price-is", "--config", str(cfg),
                     "--checkpoint", str(checkpoint), "--n", "400",
                     "--seed", "8", "--out", str(is_file)]) == 0
        row_file = tmp_path / "row.json"
        assert main(["compare", "--mc-report", str(mc_file),
                     "--is-report", str(is_file), "--out", str(row_file)]) == 0
        row = json.loads(row_file.read_text())
        assert row["n"] == 400
        assert row["vr"] > 0.0

    def test_price_dump_paths(self, tmp_path):
        cfg = write_config(tmp_path)
        dump = tmp_path / "paths.csv"
        assert main(["price", "--config", str(cfg), "--n", "16",
                     "--dump-paths", str(dump), "--out",
                     str(tmp_path / "r.json")]) == 0
        header = dump.read_text().splitlines()[0]
        assert header == "path_id,step,state_0,state_1"


class TestRunCommand:
    def test_dry_run_writes_only_config(self, tmp_path):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "dry"
        assert main(["run", "--config", str(cfg), "--out-dir", str(out_dir),
                     "--dry-run"]) == 0
        assert run_artifacts(out_dir) == ["resolved_config.json"]

    def test_full_run_emits_artifacts(self, tmp_path):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "full"
        assert main(["run", "--config", str(cfg), "--out-dir",
                     str(out_dir)]) == 0
        names = run_artifacts(out_dir)
        assert names == ["checkpoint.json", "reports.csv", "reports.json",
                         "resolved_config.json", "training_trace.csv"]
        rows = json.loads((out_dir / "reports.json").read_text())["comparison"]
        assert [row["n"] for row in rows] == [400, 800]

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        first = tmp_path / "run1"
        second = tmp_path / "run2"
        assert main(["run", "--config", str(cfg), "--out-dir", str(first)]) == 0
        assert main(["run", "--config", str(cfg), "--out-dir", str(second)]) == 0
        for name in run_artifacts(first):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_thread_count_does_not_change_artifacts(self, tmp_path):
        cfg = write_config(tmp_path)
        serial = tmp_path / "serial"
        threaded = tmp_path / "threaded"
        assert main(["run", "--config", str(cfg), "--out-dir", str(serial),
                     "--threads", "1"]) == 0
        assert main(["run", "--config", str(cfg), "--out-dir", str(threaded),
                     "--threads", "8"]) == 0
        for name in run_artifacts(serial):
            assert (serial / name).read_bytes() == (threaded / name).read_bytes()

    def test_resolved_config_is_reusable_fixed_point(self, tmp_path):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "orig"
        assert main(["run", "--config", str(cfg), "--out-dir", str(out_dir)]) == 0
        resolved = out_dir / "resolved_config.json"
        rerun_dir = tmp_path / "rerun"
        assert main(["run", "--config", str(resolved), "--out-dir",
                     str(rerun_dir)]) == 0
        for name in run_artifacts(out_dir):
            assert (out_dir / name).read_bytes() == (rerun_dir / name).read_bytes()

    def test_failure_leaves_error_file(self, tmp_path):
        cfg = write_config(tmp_path, overrides={
            "model": {"params": {"mu": [0.05, 0.05],
                                 "sigma": [[0.2, 0.0], [0.0, 0.2]],
                                 "s0": [-1.0, 1.0]},
                      "tag": "black_scholes", "n": 2},
            "payoff": {"weights": [0.5, 0.5], "strike": 1.0},
        })
        out_dir = tmp_path / "fail"
        assert main(["run", "--config", str(cfg), "--out-dir", str(out_dir)]) == 4
        error = json.loads((out_dir / "error.json").read_text())
        assert error["stage"] == "validate"
        assert error["error"] == "ModelValidationError"

    def test_format_flag_restricts_outputs(self, tmp_path):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "csvonly"
        assert main(["run", "--config", str(cfg), "--out-dir", str(out_dir),
                     "--format", "csv"]) == 0
        names = run_artifacts(out_dir)
        assert "reports.csv" in names
        assert "reports.json" not in names
