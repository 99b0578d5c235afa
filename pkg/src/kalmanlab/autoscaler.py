"""Discrete-event simulation of a message-broker cluster with a
threshold-based scaling detector.

Producers emit a workload trace; brokers serve messages FIFO with a
deterministic per-message service time under round-robin assignment;
every delivery produces a consumer latency notification carrying
Gaussian measurement jitter (with occasional heavy-tailed outliers).
The estimator node ingests every notification but performs a
measurement update only on every ceil(1/r)-th one, the rest being
predict-only steps.  When the estimated latency crosses the configured
threshold, one scaling action fires per iteration: all brokers pause
for the scaling duration, then a new broker joins and arriving load
splits across the larger cluster.

Everything is driven by seeded generators, so a fixed workload + seed
reproduces a bit-identical trace.  Time is tracked in microseconds.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numerics
from .errors import DataError
from .estimators import make_estimator

#: Default measurement update rate (one update per 4 notifications).
DEFAULT_UPDATE_RATE = 0.25

#: Default scaling duration in microseconds.
DEFAULT_SCALING_DURATION_US = 40.0


@dataclass
class EstimatorConfig:
    """Detector configuration: estimator kind plus protocol constants.

    ``kind`` accepts any registry name (case-insensitive), e.g.
    ``PASSIVE``, ``UKF``, ``EKF-PCA``, ``AKF-PCA``.  ``params`` carries
    the estimator's own knobs (q, r, embed_dim, window, ...).
    """

    kind: str
    threshold_us: float
    update_rate: float = DEFAULT_UPDATE_RATE
    scaling_duration_us: float = DEFAULT_SCALING_DURATION_US
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.update_rate <= 1.0:
            raise ValueError(
                f"update rate must be in (0, 1], got {self.update_rate}"
            )
        if self.threshold_us <= 0:
            raise ValueError(f"threshold must be > 0, got {self.threshold_us}")
        if self.scaling_duration_us < 0:
            raise ValueError(
                f"scaling duration must be >= 0, got {self.scaling_duration_us}"
            )

    @property
    def notifications_per_update(self):
        return math.ceil(1.0 / self.update_rate)


@dataclass
class SimProfile:
    """Cluster and measurement model: deterministic service time per
    message, Gaussian latency jitter, occasional outlier notifications."""

    service_time_us: float = 100.0
    noise_std_us: float = 0.0
    outlier_prob: float = 0.0
    outlier_scale: float = 6.0

    def __post_init__(self):
        if self.service_time_us < 0:
            raise ValueError("service time must be >= 0")
        if self.noise_std_us < 0:
            raise ValueError("noise std must be >= 0")
        if not 0.0 <= self.outlier_prob < 1.0:
            raise ValueError("outlier probability must be in [0, 1)")


@dataclass
class ScalingEvent:
    """One scaling action: initiation, completion, triggering request."""

    initiated_us: float
    completed_us: float
    request_index: int


@dataclass
class ScalingTrace:
    """Full log of one simulated iteration."""

    iteration: int
    send_us: np.ndarray
    deliver_us: np.ndarray
    latency_us: np.ndarray
    measured_us: np.ndarray
    estimate_us: np.ndarray
    event: Optional[ScalingEvent]
    notifications: int
    updates: int
    final_brokers: int


@dataclass
class StabilityResult:
    """Scaling-initiation statistics across repeated iterations."""

    kind: str
    t_init_us: list
    t_init_requests: list
    sigma_us2: Optional[float]
    excluded: list
    n_iter: int


def run_iteration(workload, cfg, sim=None, seed=0, iteration=0):
    """Simulate one iteration of the scaling experiment.

    The workload trace provides send timestamps in seconds.  Returns the
    per-message log; an iteration where the threshold is never crossed
    yields ``event=None`` (recorded, not an error).
    """
    sim = sim or SimProfile()
    send_us = np.asarray(workload.times, dtype=float) * 1e6
    if send_us.size == 0:
        raise DataError("workload is empty")
    n = send_us.size
    rng = numerics.make_rng(seed, iteration)
    jitter = rng.normal(0.0, sim.noise_std_us, size=n)
    if sim.outlier_prob > 0.0:
        outliers = rng.random(n) < sim.outlier_prob
        jitter = np.where(outliers, jitter * sim.outlier_scale, jitter)

    est_seed = int(rng.integers(2**63))
    estimator = make_estimator(
        cfg.kind.lower(), label=cfg.kind, seed=est_seed, **cfg.params
    )
    every = cfg.notifications_per_update

    broker_free = [0.0]
    rr = 0
    deliver_us = np.empty(n)
    latency_us = np.empty(n)
    measured_us = np.empty(n)
    estimate_us = np.empty(n)
    event = None
    updates = 0

    for i in range(n):
        b = rr % len(broker_free)
        rr += 1
        start = max(send_us[i], broker_free[b])
        finish = start + sim.service_time_us
        broker_free[b] = finish
        deliver_us[i] = finish
        latency_us[i] = finish - send_us[i]

        measured_us[i] = latency_us[i] + jitter[i]
        notification_count = i + 1
        update = notification_count % every == 0
        if update:
            updates += 1
        estimator.observe(deliver_us[i], measured_us[i], update=update)
        estimate_us[i] = estimator.level()

        if event is None and estimate_us[i] > cfg.threshold_us:
            t_init = deliver_us[i]
            completed = t_init + cfg.scaling_duration_us
            # all brokers pause for the scaling duration, then a new
            # broker joins and round-robin spreads load across it too
            for j in range(len(broker_free)):
                broker_free[j] = max(broker_free[j], t_init) + cfg.scaling_duration_us
            broker_free.append(completed)
            event = ScalingEvent(
                initiated_us=t_init,
                completed_us=completed,
                request_index=i,
            )

    return ScalingTrace(
        iteration=iteration,
        send_us=send_us,
        deliver_us=deliver_us,
        latency_us=latency_us,
        measured_us=measured_us,
        estimate_us=estimate_us,
        event=event,
        notifications=n,
        updates=updates,
        final_brokers=len(broker_free),
    )


def run_stability_experiment(workload, cfg, sim=None, n_iter=10, seed=0):
    """Repeat the iteration n_iter times and summarize initiation times.

    The workload is held fixed; only the measurement jitter (and any
    estimator initialization randomness) varies across iterations, so
    the variance of the initiation time isolates detector stability.
    Iterations without a scaling event are excluded and flagged.
    """
    if n_iter < 2:
        raise DataError(f"stability experiment needs n_iter >= 2, got {n_iter}")
    t_init_us = []
    t_init_requests = []
    excluded = []
    for it in range(n_iter):
        trace = run_iteration(workload, cfg, sim=sim, seed=seed, iteration=it)
        if trace.event is None:
            excluded.append(it)
            t_init_us.append(None)
            t_init_requests.append(None)
        else:
            t_init_us.append(trace.event.initiated_us)
            t_init_requests.append(trace.event.request_index + 1)

    valid = [t for t in t_init_us if t is not None]
    sigma = float(np.var(valid)) if len(valid) >= 1 else None
    return StabilityResult(
        kind=cfg.kind,
        t_init_us=t_init_us,
        t_init_requests=t_init_requests,
        sigma_us2=sigma,
        excluded=excluded,
        n_iter=n_iter,
    )
