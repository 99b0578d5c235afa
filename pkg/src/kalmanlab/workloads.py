"""Signal and workload generation plus CSV trace ingestion.

Generators cover the chaotic delay-differential benchmark series,
SNR-controlled noise injection, Poisson arrival streams, a synthetic
per-minute count series, a synthetic high-variance CPU-utilization
trace, and a synthetic low-variance decaying-loss signal.  External
traces enter through a small CSV format (header ``timestamp,value``,
or ``timestamp,v0,v1,...`` for vector measurements).
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels, numerics
from .errors import DataError, DimensionError, NumericError


@dataclass
class Trace:
    """A timestamped measurement series.

    ``times`` are strictly increasing seconds; ``values`` is (T, d),
    one measurement vector per row.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise DimensionError(f"values must be 1-D or 2-D, got shape {vals.shape}")
        self.values = vals
        if self.times.ndim != 1 or self.times.size != vals.shape[0]:
            raise DimensionError(
                f"{self.times.size} timestamps for {vals.shape[0]} values"
            )
        if self.times.size == 0:
            raise DataError("trace is empty")
        if not np.all(np.isfinite(self.times)):
            raise ValueError("timestamps contain non-finite entries")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values contain non-finite entries")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise DataError("timestamps must be strictly increasing")

    def __len__(self):
        return self.times.size

    @property
    def dim(self):
        return self.values.shape[1]

    def series(self):
        """The values as a flat array; only valid for 1-D traces."""
        if self.dim != 1:
            raise DimensionError(f"trace has dimension {self.dim}, expected 1")
        return self.values[:, 0]


@dataclass
class MgSpec:
    """Parameters of the delay-differential benchmark series."""

    length: int
    tau: int = 30
    beta: float = 0.2
    gamma: float = 0.1
    n_exp: float = 10.0
    dt: float = 1.0
    x0: float = 1.2

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        if self.length < self.tau:
            raise DataError(f"length {self.length} shorter than delay {self.tau}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def gen_mackey_glass(spec):
    """Integrate the delay equation by fixed-step Euler.

    The delay is ``spec.tau`` samples with constant pre-history
    ``spec.x0``.  Deterministic for a fixed spec.
    """
    x, ok = kernels.mackey_glass_euler(
        spec.length,
        spec.tau,
        spec.beta,
        spec.gamma,
        spec.n_exp,
        spec.dt,
        spec.x0,
    )
    if not ok or np.max(np.abs(x)) > 1e6:
        raise NumericError("delay-equation integration diverged (|x| > 1e6)")
    times = np.arange(spec.length, dtype=float) * spec.dt
    return Trace(times=times, values=x)


def add_noise_snr(trace, snr_db, seed=0):
    """Add white Gaussian noise sized to hit a target SNR in dB.

    ``snr_db`` of None or +inf returns the trace unchanged; a
    zero-power signal cannot define an SNR and is returned unchanged
    with a warning.
    """
    if snr_db is None or np.isinf(snr_db):
        return Trace(times=trace.times.copy(), values=trace.values.copy())
    power = float(np.mean(trace.values**2))
    if power == 0.0:
        warnings.warn("zero-power signal: SNR undefined, returning unchanged")
        return Trace(times=trace.times.copy(), values=trace.values.copy())
    noise_var = power / 10.0 ** (snr_db / 10.0)
    rng = numerics.make_rng(seed)
    noise = rng.normal(0.0, np.sqrt(noise_var), size=trace.values.shape)
    return Trace(times=trace.times.copy(), values=trace.values + noise)


@dataclass
class PoissonSpec:
    """Arrival-stream parameters: rate (events/second) and duration."""

    rate: float
    duration: float
    seed: int = 0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")


def gen_poisson_arrivals(spec):
    """Event timestamps with i.i.d. exponential inter-arrival gaps.

    Values are all 1 (one event per row).  Deterministic per seed.
    """
    rng = numerics.make_rng(spec.seed)
    # draw in chunks until past the horizon; expected count + margin
    expected = spec.rate * spec.duration
    times = []
    t = 0.0
    chunk = max(1024, int(expected * 1.2))
    while True:
        gaps = rng.exponential(1.0 / spec.rate, size=chunk)
        arrivals = t + np.cumsum(gaps)
        inside = arrivals[arrivals < spec.duration]
        times.append(inside)
        if inside.size < chunk:
            break
        t = arrivals[-1]
    stamps = np.concatenate(times)
    if stamps.size == 0:
        raise DataError(
            f"no arrivals within duration {spec.duration} at rate {spec.rate}"
        )
    return Trace(times=stamps, values=np.ones(stamps.size))


@dataclass
class CountProfile:
    """Synthetic per-minute count series: sinusoidal base rate with
    Poisson sampling and exponentially decaying random bursts."""

    length: int
    base_rate: float = 50.0
    diurnal_period: float = 1440.0
    diurnal_amplitude: float = 0.5
    burst_rate: float = 0.005
    burst_scale: float = 3.0
    burst_decay: float = 10.0

    def __post_init__(self):
        if self.length < 1:
            raise DataError(f"length must be >= 1, got {self.length}")
        if self.base_rate < 0 or self.burst_rate < 0:
            raise ValueError("rates must be >= 0")


def gen_count_series(profile, seed=0):
    """Per-minute event counts; timestamps are minute boundaries in
    seconds."""
    rng = numerics.make_rng(seed)
    minutes = np.arange(profile.length, dtype=float)
    lam = profile.base_rate * (
        1.0
        + profile.diurnal_amplitude
        * np.sin(2.0 * np.pi * minutes / profile.diurnal_period)
    )
    n_bursts = rng.poisson(profile.burst_rate * profile.length)
    for _ in range(n_bursts):
        start = rng.uniform(0.0, profile.length)
        bump = profile.base_rate * profile.burst_scale * np.exp(
            -(minutes - start) / profile.burst_decay
        )
        lam = lam + np.where(minutes >= start, bump, 0.0)
    lam = np.clip(lam, 0.0, None)
    counts = rng.poisson(lam).astype(float)
    return Trace(times=minutes * 60.0, values=counts)


@dataclass
class CpuProfile:
    """Synthetic high-variance CPU-utilization trace (percent).

    A mean-reverting level chases a slowly wandering target; load
    spikes and measurement noise sit on top, clipped to [0, 100].
    """

    length: int
    mean: float = 45.0
    reversion: float = 0.96
    target_walk_std: float = 0.3
    spike_prob: float = 0.03
    spike_scale: float = 25.0
    noise_std: float = 5.0
    dt: float = 1.0

    def __post_init__(self):
        if self.length < 1:
            raise DataError(f"length must be >= 1, got {self.length}")
        if not 0.0 <= self.reversion < 1.0:
            raise ValueError(f"reversion must be in [0, 1), got {self.reversion}")


def gen_cpu_trace(profile, seed=0):
    rng = numerics.make_rng(seed)
    target = profile.mean + np.cumsum(
        rng.normal(0.0, profile.target_walk_std, size=profile.length)
    )
    target = np.clip(target, 5.0, 95.0)
    level = np.empty(profile.length)
    x = profile.mean
    for i in range(profile.length):
        x = profile.reversion * x + (1.0 - profile.reversion) * target[i]
        level[i] = x
    spikes = rng.uniform(0.0, profile.spike_scale, size=profile.length) * (
        rng.random(profile.length) < profile.spike_prob
    )
    noise = rng.normal(0.0, profile.noise_std, size=profile.length)
    values = np.clip(level + spikes + noise, 0.0, 100.0)
    times = np.arange(profile.length, dtype=float) * profile.dt
    return Trace(times=times, values=values)


@dataclass
class LossProfile:
    """Synthetic low-variance training-loss-like signal: exponential
    decay toward a floor with occasional heavy-tailed spikes."""

    length: int
    start: float = 2.0
    floor: float = 0.05
    decay_tau: float = 300.0
    spike_prob: float = 0.01
    spike_scale: float = 0.3
    noise_std: float = 0.01
    dt: float = 1.0

    def __post_init__(self):
        if self.length < 1:
            raise DataError(f"length must be >= 1, got {self.length}")


def gen_loss_signal(profile, seed=0):
    rng = numerics.make_rng(seed)
    t = np.arange(profile.length, dtype=float)
    mean = profile.floor + (profile.start - profile.floor) * np.exp(
        -t / profile.decay_tau
    )
    spikes = rng.exponential(profile.spike_scale, size=profile.length) * (
        rng.random(profile.length) < profile.spike_prob
    )
    noise = rng.normal(0.0, profile.noise_std, size=profile.length)
    values = np.clip(mean + spikes + noise, 0.0, None)
    return Trace(times=t * profile.dt, values=values)


#: Signal kinds accepted by :func:`make_trace`.
TRACE_KINDS = (
    "mackey-glass",
    "poisson",
    "counts",
    "cpu-synthetic",
    "loss-synthetic",
    "constant",
    "step",
    "csv",
)


def make_trace(kind, params=None, seed=0):
    """Build a trace from a config-style kind + parameter mapping.

    This is the single dispatch point shared by the CLI and the
    comparison harness, so experiment configs name signals the same way
    everywhere.
    """
    params = dict(params or {})
    if kind == "mackey-glass":
        snr_db = params.pop("snr_db", None)
        trace = gen_mackey_glass(MgSpec(**params))
        return add_noise_snr(trace, snr_db, seed=seed) if snr_db is not None else trace
    if kind == "poisson":
        params.setdefault("seed", seed)
        return gen_poisson_arrivals(PoissonSpec(**params))
    if kind == "counts":
        return gen_count_series(CountProfile(**params), seed=seed)
    if kind == "cpu-synthetic":
        return gen_cpu_trace(CpuProfile(**params), seed=seed)
    if kind == "loss-synthetic":
        return gen_loss_signal(LossProfile(**params), seed=seed)
    if kind == "constant":
        length = int(params.get("length", 100))
        level = float(params.get("level", 1.0))
        dt = float(params.get("dt", 1.0))
        times = np.arange(length, dtype=float) * dt
        return Trace(times=times, values=np.full(length, level))
    if kind == "step":
        length = int(params.get("length", 200))
        at = int(params.get("at", length // 2))
        level0 = float(params.get("level0", 0.0))
        level1 = float(params.get("level1", 1.0))
        dt = float(params.get("dt", 1.0))
        if not 0 < at < length:
            raise DataError(f"step index {at} outside (0, {length})")
        values = np.where(np.arange(length) < at, level0, level1).astype(float)
        times = np.arange(length, dtype=float) * dt
        return Trace(times=times, values=values)
    if kind == "csv":
        path = params.get("path")
        if not path:
            raise DataError("csv trace kind requires a 'path' parameter")
        return load_trace_csv(path)
    raise DataError(
        f"unknown trace kind {kind!r}; valid kinds: {', '.join(TRACE_KINDS)}"
    )


def trace_csv_text(trace):
    """Render a trace as CSV text with full float precision (%.17g)."""
    if trace.dim == 1:
        header = "timestamp,value"
    else:
        header = ",".join(["timestamp"] + [f"v{i}" for i in range(trace.dim)])
    lines = [header]
    for t, row in zip(trace.times, trace.values):
        lines.append(",".join([f"{t:.17g}"] + [f"{v:.17g}" for v in row]))
    return "\n".join(lines) + "\n"


def save_trace_csv(trace, path):
    """Write a trace as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trace_csv_text(trace))


def load_trace_csv(path):
    """Read a trace written by :func:`save_trace_csv`.

    Raises :class:`DataError` with the offending line number on
    malformed rows or non-increasing timestamps.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "timestamp":
            raise DataError(
                f"{path}: line 1: expected header 'timestamp,value' or "
                f"'timestamp,v0,v1,...', got {','.join(header)!r}"
            )
        width = len(header) - 1
        times = []
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise DataError(
                    f"{path}: line {lineno}: expected {width + 1} columns, "
                    f"got {len(row)}"
                )
            try:
                parsed = [float(cell) for cell in row]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            times.append(parsed[0])
            values.append(parsed[1:])
    if not times:
        raise DataError(f"{path}: no data rows")
    times = np.asarray(times)
    if times.size > 1 and not np.all(np.diff(times) > 0):
        bad = int(np.flatnonzero(np.diff(times) <= 0)[0])
        raise DataError(
            f"{path}: line {bad + 3}: timestamps must be strictly increasing"
        )
    return Trace(times=times, values=np.asarray(values))
