"""End-to-end tests of the command-line interface: exit codes, error
JSON on stderr, deterministic artifacts, config validation."""

import json
import os

import numpy as np
import pytest

from kalmanlab.attention import params_from_json
from kalmanlab.cli import main
from kalmanlab.workloads import load_trace_csv

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def stderr_error(err):
    payload = json.loads(err)
    assert set(payload) == {"error", "message"}
    return payload


class TestGenerate:
    def test_counts_golden_fixture_regenerates(self, capsys, tmp_path):
        out = tmp_path / "counts.csv"
        code, _, _ = run_cli(
            capsys, "generate", "counts", "--length", "48", "--seed", "11",
            "--out", str(out),
        )
        assert code == 0
        with open(os.path.join(FIXTURES, "counts_trace.csv")) as fh:
            assert out.read_text() == fh.read()

    def test_mackey_glass_with_noise(self, capsys, tmp_path):
        out = tmp_path / "mg.csv"
        code, _, _ = run_cli(
            capsys, "generate", "mackey-glass", "--length", "100",
            "--tau", "30", "--snr-db", "6", "--out", str(out),
        )
        assert code == 0
        trace = load_trace_csv(str(out))
        assert len(trace) == 100

    def test_repeat_runs_are_byte_identical(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            code, _, _ = run_cli(
                capsys, "generate", "cpu-synthetic", "--length", "64",
                "--seed", "3", "--out", str(path),
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_out_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "generate", "counts")
        assert code == 1
        assert stderr_error(err)["error"] == "UsageError"

    def test_unknown_kind_is_usage_error(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "generate", "sawtooth", "--out", str(tmp_path / "x.csv")
        )
        assert code == 1
        assert stderr_error(err)["error"] == "UsageError"

    def test_wrong_parameter_for_kind(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "generate", "mackey-glass", "--base-rate", "10",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == 2
        assert "bad parameters" in stderr_error(err)["message"]

    def test_diverging_generator_is_numeric_error(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "generate", "mackey-glass", "--length", "2000",
            "--tau", "5", "--beta", "5", "--gamma", "-2", "--x0", "1.5",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == 3
        assert stderr_error(err)["error"] == "NumericError"


class TestEstimate:
    def write_config(self, tmp_path, **overrides):
        config = {
            "signal": {"kind": "constant", "length": 60, "level": 5.0},
            "estimators": [{"name": "ekf"}, {"name": "akf-pca"}],
            "seed": 3,
        }
        config.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        return str(path)

    def test_runs_and_prints_report(self, capsys, tmp_path):
        cfg = self.write_config(tmp_path)
        code, out, _ = run_cli(capsys, "estimate", "--config", cfg)
        assert code == 0
        report = json.loads(out)
        assert [e["kind"] for e in report["estimators"]] == ["ekf", "akf-pca"]
        assert all(e["nu"] < 1e-3 for e in report["estimators"])
        assert "rank" in report

    def test_output_dir_artifacts_are_deterministic(self, capsys, tmp_path):
        outputs = []
        for sub in ("run1", "run2"):
            outdir = tmp_path / sub
            cfg = self.write_config(tmp_path, output_dir=str(outdir))
            code, _, _ = run_cli(capsys, "estimate", "--config", cfg)
            assert code == 0
            outputs.append(
                {
                    name: (outdir / name).read_bytes()
                    for name in sorted(os.listdir(outdir))
                }
            )
        assert list(outputs[0]) == ["estimates_akf-pca.csv", "estimates_ekf.csv", "report.json"]
        assert outputs[0] == outputs[1]

    def test_unknown_estimator_recorded_with_valid_kinds(self, capsys, tmp_path):
        cfg = self.write_config(
            tmp_path, estimators=[{"name": "median"}, {"name": "ekf"}]
        )
        code, out, _ = run_cli(capsys, "estimate", "--config", cfg)
        assert code == 0
        report = json.loads(out)
        assert "valid kinds" in report["estimators"][0]["error"]
        assert report["rank"]["estimators"] == ["ekf"]

    def test_unknown_top_level_key_rejected(self, capsys, tmp_path):
        cfg = self.write_config(tmp_path, iterations=5)
        code, _, err = run_cli(capsys, "estimate", "--config", cfg)
        assert code == 2
        assert "iterations" in stderr_error(err)["message"]

    def test_unknown_estimator_key_rejected(self, capsys, tmp_path):
        cfg = self.write_config(
            tmp_path, estimators=[{"name": "ekf", "gain": 0.5}]
        )
        code, _, err = run_cli(capsys, "estimate", "--config", cfg)
        assert code == 2
        assert "gain" in stderr_error(err)["message"]

    def test_missing_seed_rejected(self, capsys, tmp_path):
        config = {
            "signal": {"kind": "constant", "length": 60},
            "estimators": [{"name": "ekf"}],
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        code, _, err = run_cli(capsys, "estimate", "--config", str(path))
        assert code == 2
        assert "seed" in stderr_error(err)["message"]

    def test_unreadable_config(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "estimate", "--config", str(tmp_path / "missing.json")
        )
        assert code == 2
        assert "cannot read config" in stderr_error(err)["message"]

    def test_malformed_json(self, capsys, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        code, _, err = run_cli(capsys, "estimate", "--config", str(path))
        assert code == 2
        assert "invalid JSON" in stderr_error(err)["message"]


class TestTrainAttention:
    def make_trace_csv(self, capsys, tmp_path, kind="constant", length=40):
        path = tmp_path / "trace.csv"
        code, _, _ = run_cli(
            capsys, "generate", kind, "--length", str(length),
            "--level", "3.0", "--out", str(path),
        )
        assert code == 0
        return str(path)

    def test_constant_trace_trains_to_zero_loss(self, capsys, tmp_path):
        trace = self.make_trace_csv(capsys, tmp_path)
        out = tmp_path / "params.json"
        curve = tmp_path / "loss.csv"
        code, stdout, _ = run_cli(
            capsys, "train-attention", "--trace", trace, "--out", str(out),
            "--epochs", "30", "--loss-curve", str(curve),
        )
        assert code == 0
        summary = json.loads(stdout)
        assert summary["epochs"] == 30
        assert summary["final_loss"] < 1e-10
        params = params_from_json(out.read_text())
        assert params.d_in == 1
        lines = curve.read_text().splitlines()
        assert lines[0] == "epoch,loss"
        assert len(lines) == 31

    def test_repeat_runs_are_byte_identical(self, capsys, tmp_path):
        trace = self.make_trace_csv(capsys, tmp_path)
        blobs = []
        for name in ("p1.json", "p2.json"):
            out = tmp_path / name
            code, _, _ = run_cli(
                capsys, "train-attention", "--trace", trace,
                "--out", str(out), "--epochs", "10",
            )
            assert code == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_trace_shorter_than_window_rejected(self, capsys, tmp_path):
        trace = self.make_trace_csv(capsys, tmp_path, length=10)
        code, _, err = run_cli(
            capsys, "train-attention", "--trace", trace,
            "--out", str(tmp_path / "p.json"),
        )
        assert code == 2
        assert stderr_error(err)["error"] == "DataError"


class TestScaleSim:
    def write_config(self, tmp_path, **overrides):
        config = {
            "workload": {"kind": "poisson", "rate": 2000.0, "duration": 0.02},
            "estimators": [{"name": "passive"}],
            "threshold_us": 200.0,
            "seed": 5,
            "noise_std_us": 0.0,
        }
        config.update(overrides)
        path = tmp_path / "scale.json"
        path.write_text(json.dumps(config))
        return str(path)

    def test_summary_shape_and_defaults(self, capsys, tmp_path):
        cfg = self.write_config(tmp_path)
        code, out, _ = run_cli(capsys, "scale-sim", "--config", cfg)
        assert code == 0
        summary = json.loads(out)
        assert summary["n_iter"] == 10
        assert summary["update_rate"] == 0.25
        assert summary["scaling_duration_us"] == 40.0
        entry = summary["estimators"][0]
        assert entry["kind"] == "passive"
        assert len(entry["t_init_us"]) == 10

    def test_no_event_rows_in_csv(self, capsys, tmp_path):
        outdir = tmp_path / "out"
        cfg = self.write_config(
            tmp_path, threshold_us=1e9, output_dir=str(outdir), n_iter=3
        )
        code, out, _ = run_cli(capsys, "scale-sim", "--config", cfg)
        assert code == 0
        summary = json.loads(out)
        assert summary["estimators"][0]["sigma_us2"] is None
        lines = (outdir / "scaling_passive.csv").read_text().splitlines()
        assert lines[0] == "iteration,t_i_us,t_i_requests"
        assert lines[1:] == [f"{i},no event,no event" for i in range(3)]

    def test_artifacts_are_deterministic(self, capsys, tmp_path):
        blobs = []
        for sub in ("s1", "s2"):
            outdir = tmp_path / sub
            cfg = self.write_config(
                tmp_path, output_dir=str(outdir), noise_std_us=50.0,
                estimators=[{"name": "ukf"}], n_iter=4,
            )
            code, _, _ = run_cli(capsys, "scale-sim", "--config", cfg)
            assert code == 0
            blobs.append(
                {
                    name: (outdir / name).read_bytes()
                    for name in sorted(os.listdir(outdir))
                }
            )
        assert list(blobs[0]) == ["scaling_ukf.csv", "summary.json"]
        assert blobs[0] == blobs[1]

    def test_unknown_workload_key_rejected(self, capsys, tmp_path):
        cfg = self.write_config(
            tmp_path, workload={"kind": "poisson", "rate": 100.0, "lam": 2.0}
        )
        code, _, err = run_cli(capsys, "scale-sim", "--config", cfg)
        assert code == 2
        assert "lam" in stderr_error(err)["message"]


class TestHelp:
    @pytest.mark.parametrize(
        "argv, needle",
        [
            (("--help",), "generate"),
            (("generate", "--help"), "--snr-db"),
            (("estimate", "--help"), "--config"),
            (("train-attention", "--help"), "--epochs"),
            (("scale-sim", "--help"), "--out-dir"),
        ],
    )
    def test_help_exits_zero_and_names_flags(self, capsys, argv, needle):
        with pytest.raises(SystemExit) as exc:
            main(list(argv))
        assert exc.value.code == 0
        assert needle in capsys.readouterr().out
