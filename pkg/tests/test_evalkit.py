"""Tests for error statistics, the rank matrix, residual variance,
relative error, and the one-step comparison harness."""

import json
import os

import numpy as np
import pytest

from kalmanlab.errors import DataError, DimensionError
from kalmanlab.evalkit import (
    ErrorStats,
    convergence_latency,
    error_stats,
    rank_matrix,
    relative_error,
    residual_variance,
    run_comparison,
)
from kalmanlab.workloads import Trace

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def load_error_grid():
    with open(os.path.join(FIXTURES, "error_grid.json")) as fh:
        return json.load(fh)


class TestErrorStats:
    def test_perfect_estimates_are_all_zero(self):
        x = np.array([1.0, -2.0, 3.5, 0.0])
        s = error_stats(x, x)
        assert s.nu == 0.0 and s.rho == 0.0 and s.mse == 0.0 and s.rmse == 0.0

    def test_constant_offset(self):
        truth = np.zeros(6)
        s = error_stats(truth + 0.5, truth)
        assert s.nu == pytest.approx(0.5, abs=1e-15)
        assert s.rho == pytest.approx(0.0, abs=1e-15)
        assert s.mse == pytest.approx(0.25, abs=1e-15)
        assert s.rmse == pytest.approx(0.5, abs=1e-15)

    def test_five_point_fixture(self):
        # errors (-0.5, 0.5, -0.5, 0.5, 1.0): nu = 0.6, mean = 0.2,
        # population var = 0.36, mse = 0.4
        est = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        truth = np.array([1.5, 1.5, 3.5, 3.5, 4.0])
        s = error_stats(est, truth)
        assert s.nu == pytest.approx(0.6, abs=1e-12)
        assert s.rho == pytest.approx(0.6, abs=1e-12)
        assert s.mse == pytest.approx(0.4, abs=1e-12)
        assert s.rmse == pytest.approx(np.sqrt(0.4), abs=1e-12)

    def test_rmse_squared_is_mse(self):
        rng = np.random.default_rng(3)
        s = ErrorStats.from_errors(rng.normal(size=40))
        assert s.rmse**2 == pytest.approx(s.mse, abs=1e-12)
        assert s.nu >= 0 and s.rho >= 0

    def test_accepts_traces(self):
        t = np.arange(5, dtype=float)
        a = Trace(times=t, values=np.array([1.0, 2, 3, 4, 5]))
        b = Trace(times=t, values=np.array([1.0, 1, 3, 3, 5]))
        s = error_stats(a, b)
        assert s.nu == pytest.approx(0.4, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError, match="points"):
            error_stats(np.zeros(4), np.zeros(5))

    def test_empty(self):
        with pytest.raises(DataError, match="empty"):
            ErrorStats.from_errors([])


class TestRankMatrix:
    def test_single_row_reversed_sort_order(self):
        table = rank_matrix([[3.0, 1.0, 2.0]], ["m"], ["a", "b", "c"])
        assert table.scores.tolist() == [[1.0, 3.0, 2.0]]
        assert table.mean_rank.tolist() == [1.0, 3.0, 2.0]
        assert table.ordering == ["b", "c", "a"]

    def test_higher_is_better(self):
        table = rank_matrix(
            [[3.0, 1.0, 2.0]], ["m"], ["a", "b", "c"], better="higher"
        )
        assert table.scores.tolist() == [[3.0, 1.0, 2.0]]
        assert table.ordering == ["a", "c", "b"]

    def test_ties_share_average_points(self):
        table = rank_matrix([[1.0, 1.0, 5.0]], ["m"], ["a", "b", "c"])
        assert table.scores.tolist() == [[2.5, 2.5, 1.0]]

    def test_distinct_rows_are_permutations(self):
        rng = np.random.default_rng(9)
        values = rng.permutation(np.arange(1.0, 7.0)).reshape(1, 6)
        values = np.vstack([values, rng.normal(size=6)])
        table = rank_matrix(values, ["r0", "r1"], list("abcdef"))
        for row in table.scores:
            assert sorted(row.tolist()) == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]

    def test_nan_cell_rejected(self):
        with pytest.raises(DataError, match="NaN"):
            rank_matrix([[1.0, np.nan]], ["m"], ["a", "b"])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            rank_matrix([[1.0, 2.0]], ["m"], ["a", "b", "c"])
        with pytest.raises(DimensionError, match="2-D"):
            rank_matrix([1.0, 2.0], ["m"], ["a", "b"])

    def test_better_validated(self):
        with pytest.raises(ValueError, match="better"):
            rank_matrix([[1.0, 2.0]], ["m"], ["a", "b"], better="best")

    def test_committed_grid_scores(self):
        grid = load_error_grid()
        table = rank_matrix(grid["values"], grid["metrics"], grid["estimators"])
        assert table.scores.tolist() == [
            [2.0, 1.0, 3.0, 6.0, 4.0, 5.0, 7.0],
            [2.0, 1.0, 5.0, 6.0, 3.0, 4.0, 7.0],
            [5.0, 3.0, 1.0, 2.0, 7.0, 4.0, 6.0],
            [6.0, 5.0, 1.0, 3.0, 7.0, 4.0, 2.0],
            [4.0, 1.0, 6.0, 7.0, 2.0, 3.0, 5.0],
            [4.0, 1.0, 7.0, 6.0, 3.0, 2.0, 5.0],
        ]

    def test_committed_grid_mean_rank(self):
        grid = load_error_grid()
        table = rank_matrix(grid["values"], grid["metrics"], grid["estimators"])
        by_label = dict(zip(table.cols, table.mean_rank))
        assert f"{by_label['akf-pca']:.3f}" == "5.333"
        assert by_label["akf-pca"] == pytest.approx(16.0 / 3.0, abs=1e-12)
        assert by_label["ukf-pca"] == pytest.approx(5.0, abs=1e-12)
        assert by_label["joint-ekf-pca"] == pytest.approx(13.0 / 3.0, abs=1e-12)
        assert by_label["ekf-pca"] == pytest.approx(23.0 / 6.0, abs=1e-12)
        assert by_label["ekf"] == pytest.approx(23.0 / 6.0, abs=1e-12)
        assert by_label["joint-ukf-pca"] == pytest.approx(11.0 / 3.0, abs=1e-12)
        assert by_label["ukf"] == pytest.approx(2.0, abs=1e-12)

    def test_committed_grid_ordering(self):
        grid = load_error_grid()
        table = rank_matrix(grid["values"], grid["metrics"], grid["estimators"])
        assert table.ordering == [
            "akf-pca",
            "ukf-pca",
            "joint-ekf-pca",
            "ekf-pca",
            "ekf",
            "joint-ukf-pca",
            "ukf",
        ]


class TestResidualVariance:
    def test_exactly_linear_series(self):
        t = np.arange(10, dtype=float)
        assert residual_variance(2.0 * t + 3.0, timestamps=t) <= 1e-12

    def test_constant_series(self):
        assert residual_variance(np.full(8, 4.2)) <= 1e-12

    def test_three_point_fixture(self):
        # best line through (0,0), (1,1), (2,0) is y = 1/3; residuals
        # (-1/3, 2/3, -1/3) give mean square 2/9
        out = residual_variance([0.0, 1.0, 0.0], timestamps=[0.0, 1.0, 2.0])
        assert out == pytest.approx(2.0 / 9.0, abs=1e-12)

    def test_invariant_under_linear_trend(self):
        rng = np.random.default_rng(12)
        t = np.sort(rng.uniform(0, 10, size=40))
        y = rng.normal(size=40)
        base = residual_variance(y, timestamps=t)
        trended = residual_variance(y + 5.0 * t - 2.0, timestamps=t)
        assert trended == pytest.approx(base, abs=1e-9)

    def test_accepts_trace(self):
        t = np.arange(6, dtype=float)
        y = np.array([0.0, 2.0, 1.0, 3.0, 2.0, 4.0])
        assert residual_variance(Trace(times=t, values=y)) == pytest.approx(
            residual_variance(y, timestamps=t), abs=0.0
        )

    def test_needs_three_points(self):
        with pytest.raises(DataError, match=">= 3"):
            residual_variance([1.0, 2.0])

    def test_degenerate_timestamps(self):
        with pytest.raises(DataError, match="degenerate"):
            residual_variance([1.0, 2.0, 3.0], timestamps=[5.0, 5.0, 5.0])

    def test_timestamp_length_mismatch(self):
        with pytest.raises(DimensionError):
            residual_variance([1.0, 2.0, 3.0], timestamps=[0.0, 1.0])


class TestRelativeError:
    def test_perfect(self):
        assert relative_error([10.0, 20.0], [10.0, 20.0]) == 0.0

    def test_ten_percent(self):
        assert relative_error([10.0], [11.0]) == pytest.approx(0.1, abs=1e-15)

    def test_mean_over_entries(self):
        out = relative_error([10.0, 20.0], [11.0, 18.0])
        assert out == pytest.approx(0.1, abs=1e-15)

    def test_nonpositive_truth_rejected(self):
        with pytest.raises(DataError, match="> 0"):
            relative_error([10.0, 0.0], [10.0, 1.0])
        with pytest.raises(DataError, match="> 0"):
            relative_error([-1.0], [1.0])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            relative_error([1.0, 2.0], [1.0])


class TestConvergenceLatency:
    def test_counts_steps_until_within_tolerance(self):
        truth = np.array([0.0] * 5 + [4.0] * 10)
        err = np.array([1.0] * 8 + [0.3] + [0.0] * 6)
        out = convergence_latency(truth, truth + err, step_index=5, step_height=4.0)
        assert out == 3

    def test_settles_immediately(self):
        truth = np.array([0.0, 0.0, 4.0, 4.0])
        assert convergence_latency(truth, truth, 2, 4.0) == 0

    def test_never_settles(self):
        truth = np.zeros(6)
        est = np.ones(6)
        assert convergence_latency(truth, est, 2, 4.0) is None

    def test_step_index_bounds(self):
        with pytest.raises(DataError, match="step index"):
            convergence_latency(np.zeros(4), np.zeros(4), 4, 1.0)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            convergence_latency(np.zeros(4), np.zeros(3), 0, 1.0)


class TestRunComparison:
    def test_constant_signal_kalman_estimators_converge(self):
        report = run_comparison(
            {"kind": "constant", "length": 80, "level": 5.0},
            [{"name": "ekf"}, {"name": "ukf"}, {"name": "ckf"}],
            seed=0,
        )
        assert len(report["estimators"]) == 3
        for entry in report["estimators"]:
            assert "error" not in entry
            assert entry["nu"] < 1e-3

    def test_identical_specs_identical_columns(self):
        signal = {"kind": "counts", "length": 60}
        report = run_comparison(
            signal,
            [
                {"name": "akf-pca", "label": "a", "seed": 5},
                {"name": "akf-pca", "label": "b", "seed": 5},
            ],
            seed=1,
        )
        a, b = report["estimators"]
        assert a["nu"] == b["nu"]
        assert a["rho"] == b["rho"]
        assert a["mse"] == b["mse"]

    def test_estimator_failure_recorded_and_run_continues(self):
        report = run_comparison(
            {"kind": "constant", "length": 40, "level": 2.0},
            [{"name": "no-such-kind"}, {"name": "ekf"}],
            seed=0,
        )
        failed, ok = report["estimators"]
        assert "error" in failed and "nu" not in failed
        assert "unknown estimator kind" in failed["error"]
        assert "nu" in ok
        assert report["rank"]["estimators"] == ["ekf"]

    def test_step_signal_reports_convergence_latency(self):
        # a one-step-behind tracker recovers exactly one step after the
        # jump on a noiseless step signal
        report = run_comparison(
            {"kind": "step", "length": 40, "at": 20, "level0": 0.0, "level1": 4.0},
            [{"name": "passive"}],
            seed=0,
        )
        assert report["estimators"][0]["convergence_latency"] == 1

    def test_deterministic_report(self):
        signal = {"kind": "cpu-synthetic", "length": 60}
        specs = [{"name": "ekf"}, {"name": "akf-pca"}]
        a = run_comparison(signal, specs, seed=9)
        b = run_comparison(signal, specs, seed=9)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_writes_report_and_per_estimator_csv(self, tmp_path):
        outdir = tmp_path / "out"
        report = run_comparison(
            {"kind": "constant", "length": 30, "level": 1.0},
            [{"name": "ekf", "label": "ekf"}],
            seed=0,
            outdir=str(outdir),
        )
        with open(outdir / "report.json") as fh:
            on_disk = json.load(fh)
        assert on_disk == json.loads(json.dumps(report))
        lines = (outdir / "estimates_ekf.csv").read_text().splitlines()
        assert lines[0] == "t,truth,estimate,error"
        assert len(lines) == 31

    def test_signal_needs_kind(self):
        with pytest.raises(DataError, match="kind"):
            run_comparison({"length": 40}, [{"name": "ekf"}])

    def test_estimator_spec_needs_name(self):
        with pytest.raises(DataError, match="name"):
            run_comparison(
                {"kind": "constant", "length": 40, "level": 1.0}, [{"q": 0.1}]
            )

    def test_too_short_for_burn_in(self):
        with pytest.raises(DataError, match="burn-in"):
            run_comparison(
                {"kind": "constant", "length": 8, "level": 1.0},
                [{"name": "ekf"}],
            )
