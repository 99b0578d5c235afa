"""Kalman-filter estimators with PCA measurement fusion and key-less
attention, plus the workload generators, comparison harness, and
autoscaler stability simulation built around them."""

from .attention import (
    AttentionOutput,
    AttentionParams,
    akf_step,
    attn_forward,
    attn_init,
    attn_train,
    params_from_json,
    params_to_json,
)
from .autoscaler import (
    EstimatorConfig,
    ScalingTrace,
    SimProfile,
    StabilityResult,
    run_iteration,
    run_stability_experiment,
)
from .baselines import SavgolSpec, passive_step, savgol_coefficients, savgol_filter
from .errors import DataError, DimensionError, KalmanLabError, NumericError
from .estimators import VALID_KINDS, StreamEstimator, make_estimator
from .evalkit import (
    ErrorStats,
    RankTable,
    convergence_latency,
    error_stats,
    rank_matrix,
    relative_error,
    residual_variance,
    run_comparison,
)
from .filters import (
    LinearModel,
    NonlinearModel,
    StateEstimate,
    UkfConfig,
    ckf_step,
    ekf_step,
    kf_step,
    ukf_step,
)
from .numerics import eig_sym, jacobian_fd, least_squares, make_rng, softmax
from .pca import (
    JointEstimate,
    MeasurementWindow,
    PcaModel,
    joint_init,
    joint_step,
    kfpca_step_lin,
    kfpca_step_ls,
    pca_fit,
    pca_project,
    ukfpca_step,
)
from .workloads import (
    CountProfile,
    CpuProfile,
    LossProfile,
    MgSpec,
    PoissonSpec,
    Trace,
    add_noise_snr,
    gen_count_series,
    gen_cpu_trace,
    gen_loss_signal,
    gen_mackey_glass,
    gen_poisson_arrivals,
    load_trace_csv,
    make_trace,
    save_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionOutput",
    "AttentionParams",
    "CountProfile",
    "CpuProfile",
    "DataError",
    "DimensionError",
    "ErrorStats",
    "EstimatorConfig",
    "JointEstimate",
    "KalmanLabError",
    "LinearModel",
    "LossProfile",
    "MeasurementWindow",
    "MgSpec",
    "NonlinearModel",
    "NumericError",
    "PcaModel",
    "PoissonSpec",
    "RankTable",
    "SavgolSpec",
    "ScalingTrace",
    "SimProfile",
    "StabilityResult",
    "StateEstimate",
    "StreamEstimator",
    "Trace",
    "UkfConfig",
    "VALID_KINDS",
    "add_noise_snr",
    "akf_step",
    "attn_forward",
    "attn_init",
    "attn_train",
    "ckf_step",
    "convergence_latency",
    "eig_sym",
    "ekf_step",
    "error_stats",
    "gen_count_series",
    "gen_cpu_trace",
    "gen_loss_signal",
    "gen_mackey_glass",
    "gen_poisson_arrivals",
    "jacobian_fd",
    "joint_init",
    "joint_step",
    "kf_step",
    "kfpca_step_lin",
    "kfpca_step_ls",
    "least_squares",
    "load_trace_csv",
    "make_estimator",
    "make_rng",
    "make_trace",
    "params_from_json",
    "params_to_json",
    "pca_fit",
    "pca_project",
    "passive_step",
    "rank_matrix",
    "relative_error",
    "residual_variance",
    "run_comparison",
    "run_iteration",
    "run_stability_experiment",
    "save_trace_csv",
    "savgol_coefficients",
    "savgol_filter",
    "softmax",
    "ukf_step",
    "ukfpca_step",
]
