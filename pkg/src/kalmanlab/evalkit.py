"""Estimator evaluation: error statistics, rank matrix, residual
variance, relative error, and the one-step-ahead comparison harness."""

import json
import os
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import DataError, DimensionError, KalmanLabError
from .estimators import make_estimator
from .ioutil import atomic_write_text
from .workloads import Trace, add_noise_snr, make_trace

#: Steps excluded from error statistics while estimators warm up.
DEFAULT_BURN_IN = 10


@dataclass
class ErrorStats:
    """Error summary: mean absolute (nu), std (rho), mse, rmse."""

    nu: float
    rho: float
    mse: float
    rmse: float

    @classmethod
    def from_errors(cls, errors):
        errors = np.asarray(errors, dtype=float).ravel()
        if errors.size == 0:
            raise DataError("cannot summarize an empty error sequence")
        mse = float(np.mean(errors**2))
        return cls(
            nu=float(np.mean(np.abs(errors))),
            rho=float(np.std(errors)),
            mse=mse,
            rmse=float(np.sqrt(mse)),
        )


def _series_of(x):
    if isinstance(x, Trace):
        return x.series()
    return np.asarray(x, dtype=float).ravel()


def error_stats(estimates, truth):
    """Error statistics of aligned estimate and truth series."""
    est = _series_of(estimates)
    tru = _series_of(truth)
    if est.size != tru.size:
        raise DimensionError(
            f"estimates have {est.size} points, truth has {tru.size}"
        )
    return ErrorStats.from_errors(est - tru)


@dataclass
class RankTable:
    """Rank points per metric row and estimator column.

    Within each row the best estimator scores ``n_estimators`` points
    and the worst scores 1 (ties share the average of their points).
    ``mean_rank`` is the column mean; ``ordering`` lists estimators from
    best to worst.
    """

    rows: list
    cols: list
    scores: np.ndarray
    mean_rank: np.ndarray
    ordering: list


def _rank_row(values, better):
    """Rank points for one metric row, ties averaged."""
    values = np.asarray(values, dtype=float)
    n = values.size
    keyed = values if better == "lower" else -values
    order = np.argsort(keyed, kind="stable")
    points = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and keyed[order[j + 1]] == keyed[order[i]]:
            j += 1
        # positions i..j (0-based, best first) share the average points
        avg = np.mean([n - pos for pos in range(i, j + 1)])
        for pos in range(i, j + 1):
            points[order[pos]] = avg
        i = j + 1
    return points


def rank_matrix(values, row_labels, col_labels, better="lower"):
    """Rank estimators across metric rows (lower is better by default)."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DimensionError(f"values must be 2-D, got shape {values.shape}")
    if values.shape != (len(row_labels), len(col_labels)):
        raise DimensionError(
            f"values shape {values.shape} does not match "
            f"{len(row_labels)} rows x {len(col_labels)} cols"
        )
    if np.any(np.isnan(values)):
        raise DataError("rank table contains NaN cells")
    if better not in ("lower", "higher"):
        raise ValueError(f"better must be 'lower' or 'higher', got {better!r}")

    scores = np.vstack([_rank_row(row, better) for row in values])
    mean_rank = scores.mean(axis=0)

    def sort_key(j):
        # primary: mean rank; tie-break: the column's sorted score vector,
        # then the label, so the ordering is total and deterministic
        col_sorted = tuple(sorted(scores[:, j], reverse=True))
        return (-mean_rank[j], tuple(-v for v in col_sorted), col_labels[j])

    order = sorted(range(len(col_labels)), key=sort_key)
    ordering = [col_labels[j] for j in order]
    return RankTable(
        rows=list(row_labels),
        cols=list(col_labels),
        scores=scores,
        mean_rank=mean_rank,
        ordering=ordering,
    )


def residual_variance(series, timestamps=None):
    """Mean squared residual about the least-squares line of a series."""
    if isinstance(series, Trace):
        t = series.times
        y = series.series()
    else:
        y = np.asarray(series, dtype=float).ravel()
        t = (
            np.arange(y.size, dtype=float)
            if timestamps is None
            else np.asarray(timestamps, dtype=float).ravel()
        )
    if y.size < 3:
        raise DataError(f"residual variance needs >= 3 points, got {y.size}")
    if t.size != y.size:
        raise DimensionError(f"{t.size} timestamps for {y.size} values")
    tc = t - t.mean()
    denom = float(tc @ tc)
    if denom == 0.0:
        raise DataError("degenerate timestamps: least-squares line undefined")
    slope = float(tc @ (y - y.mean())) / denom
    intercept = float(y.mean() - slope * t.mean())
    resid = y - (slope * t + intercept)
    return float(np.mean(resid**2))


def relative_error(truth, predictions):
    """Mean relative absolute error, (1/n) sum |pred - truth| / truth."""
    tru = _series_of(truth)
    pred = _series_of(predictions)
    if tru.size != pred.size:
        raise DimensionError(
            f"truth has {tru.size} points, predictions have {pred.size}"
        )
    if np.any(tru <= 0):
        raise DataError("relative error undefined: truth entries must be > 0")
    return float(np.mean(np.abs(pred - tru) / tru))


def convergence_latency(truth, estimates, step_index, step_height, frac=0.1):
    """Steps from an input step-change until |error| < frac * |height|.

    Returns None when the estimator never settles within the series.
    """
    tru = _series_of(truth)
    est = _series_of(estimates)
    if tru.size != est.size:
        raise DimensionError("truth/estimate length mismatch")
    if not 0 <= step_index < tru.size:
        raise DataError(f"step index {step_index} outside series")
    tol = frac * abs(step_height)
    err = np.abs(est - tru)
    for k in range(step_index, tru.size):
        if err[k] < tol:
            return k - step_index
    return None


def _fmt(x):
    return f"{x:.17g}"


def run_comparison(signal, estimator_specs, seed=0, outdir=None,
                   burn_in=DEFAULT_BURN_IN):
    """One-step-ahead comparison of estimators on a generated signal.

    ``signal`` is a mapping with a ``kind`` plus generator parameters
    and an optional ``snr_db``; ``estimator_specs`` is a list of
    mappings, each with a ``name`` (estimator kind), optional ``label``
    and per-kind parameters.  Estimator failures are recorded in the
    report and the run continues.  When ``outdir`` is given, a per-step
    CSV per estimator and the JSON report are written there.
    """
    signal = dict(signal)
    kind = signal.pop("kind", None)
    if kind is None:
        raise DataError("signal spec needs a 'kind'")
    experiment = signal.pop("experiment", kind)
    snr_db = signal.pop("snr_db", None)
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)

    truth = make_trace(
        kind, signal, seed=int(numerics.make_rng(seed, 0).integers(2**63))
    )
    if snr_db is not None:
        measured = add_noise_snr(
            truth, snr_db, seed=int(numerics.make_rng(seed, 1).integers(2**63))
        )
    else:
        measured = truth
    truth_vals = truth.series()
    meas_vals = measured.series()
    times = measured.times
    n_steps = times.size
    if n_steps <= burn_in + 1:
        raise DataError(
            f"signal has {n_steps} points, need more than burn-in {burn_in}"
        )

    step_at = (
        int(signal.get("at", int(signal.get("length", 200)) // 2))
        if kind == "step"
        else None
    )
    step_height = (
        abs(float(signal.get("level1", 1.0)) - float(signal.get("level0", 0.0)))
        if kind == "step"
        else None
    )

    results = []
    rank_rows = {"nu": [], "rho": [], "mse": []}
    rank_cols = []
    csv_paths = {}
    for idx, spec in enumerate(estimator_specs):
        spec = dict(spec)
        name = spec.pop("name", None)
        if name is None:
            raise DataError("estimator spec needs a 'name'")
        label = spec.pop("label", name)
        spec.setdefault("seed", int(numerics.make_rng(seed, 2, idx).integers(2**63)))
        entry = {"name": label, "kind": name}
        try:
            est = make_estimator(name, label=label, **spec)
            preds = np.empty(n_steps)
            preds[0] = meas_vals[0]
            est.observe(times[0], meas_vals[0])
            for k in range(1, n_steps):
                preds[k] = est.predict_next()
                est.observe(times[k], meas_vals[k])
            errors = preds - truth_vals
            stats = ErrorStats.from_errors(errors[burn_in:])
            entry.update(
                nu=stats.nu, rho=stats.rho, mse=stats.mse,
                convergence_latency=(
                    convergence_latency(truth_vals, preds, step_at, step_height)
                    if step_at is not None
                    else None
                ),
            )
            rank_rows["nu"].append(stats.nu)
            rank_rows["rho"].append(stats.rho)
            rank_rows["mse"].append(stats.mse)
            rank_cols.append(label)
            if outdir is not None:
                lines = ["t,truth,estimate,error"]
                for k in range(n_steps):
                    lines.append(
                        f"{_fmt(times[k])},{_fmt(truth_vals[k])},"
                        f"{_fmt(preds[k])},{_fmt(errors[k])}"
                    )
                path = os.path.join(outdir, f"estimates_{label}.csv")
                csv_paths[label] = path
                atomic_write_text(path, "\n".join(lines) + "\n")
        except KalmanLabError as exc:
            entry["error"] = str(exc)
        results.append(entry)

    report = {"experiment": experiment, "seed": seed, "estimators": results}
    if rank_cols:
        table = rank_matrix(
            np.array([rank_rows["nu"], rank_rows["rho"], rank_rows["mse"]]),
            ["nu", "rho", "mse"],
            rank_cols,
        )
        report["rank"] = {
            "metrics": table.rows,
            "estimators": table.cols,
            "scores": table.scores.tolist(),
            "mean_rank": {c: float(m) for c, m in zip(table.cols, table.mean_rank)},
            "ordering": table.ordering,
        }
    if outdir is not None:
        atomic_write_text(
            os.path.join(outdir, "report.json"),
            json.dumps(report, indent=2, sort_keys=True) + "\n",
        )
    return report
