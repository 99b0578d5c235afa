"""PCA measurement fusion: component extraction over a sliding window,
the two KF-PCA update methods (least-squares and linearization), the
unscented variant, and the joint innovation-correction estimator.

The fusion steps are pure functions like the base filters; sliding
windows, refit cadence and linearization history are managed by the
streaming wrappers in :mod:`kalmanlab.estimators`.
"""

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics
from .errors import DataError, DimensionError, NumericError
from .filters import (
    StateEstimate,
    _ekf_core,
    _finish,
    _ukf_core,
    innovation_gain,
    unscented_predict,
    unscented_update,
)

#: A state-mean norm below this is treated as degenerate for the
#: least-squares observation solve.
DEGENERATE_NORM = 1e-12


@dataclass
class PcaModel:
    """Fitted principal components of a measurement window.

    ``components`` holds the retained eigenvector columns (eigenvalue
    above ``threshold``, descending), ``mean`` the column means of the
    fitted window.
    """

    threshold: float
    components: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        self.components = numerics.as_matrix(self.components, "components")
        self.eigenvalues = numerics.as_vector(self.eigenvalues, "eigenvalues")
        self.mean = numerics.as_vector(self.mean, "mean")
        if self.components.shape[0] != self.mean.size:
            raise DimensionError(
                f"components have {self.components.shape[0]} rows, "
                f"mean has length {self.mean.size}"
            )
        if self.components.shape[1] != self.eigenvalues.size:
            raise DimensionError(
                f"{self.components.shape[1]} components but "
                f"{self.eigenvalues.size} eigenvalues"
            )

    @property
    def input_dim(self):
        return self.components.shape[0]

    @property
    def n_components(self):
        return self.components.shape[1]

    def project_cov(self, r):
        """Measurement-noise covariance in component space: V^T R V."""
        r = numerics.as_matrix(r, "R")
        if r.shape != (self.input_dim, self.input_dim):
            raise DimensionError(
                f"R has shape {r.shape}, expected "
                f"({self.input_dim}, {self.input_dim})"
            )
        return numerics.symmetrize(self.components.T @ r @ self.components)


def identity_pca(dim):
    """Full-rank identity model: projection is a no-op.

    Used as the bootstrap before the first window refit, and in tests as
    the t=0 full-rank zero-mean case.
    """
    return PcaModel(
        threshold=0.0,
        components=np.eye(dim),
        eigenvalues=np.ones(dim),
        mean=np.zeros(dim),
    )


class MeasurementWindow:
    """Ring buffer of the most recent ``capacity`` measurement vectors."""

    def __init__(self, capacity):
        capacity = int(capacity)
        if capacity < 1:
            raise DimensionError(f"window capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries = deque(maxlen=capacity)

    def push(self, timestamp, value):
        value = numerics.as_vector(value, "measurement")
        timestamp = float(timestamp)
        if self._entries:
            last_t, last_v = self._entries[-1]
            if timestamp < last_t:
                raise DataError(
                    f"timestamps must be non-decreasing: {timestamp} < {last_t}"
                )
            if value.size != last_v.size:
                raise DimensionError(
                    f"measurement length changed from {last_v.size} to {value.size}"
                )
        self._entries.append((timestamp, value))

    def __len__(self):
        return len(self._entries)

    @property
    def full(self):
        return len(self._entries) == self.capacity

    @property
    def dim(self):
        if not self._entries:
            raise DataError("window is empty")
        return self._entries[0][1].size

    def timestamps(self):
        return np.array([t for t, _ in self._entries])

    def values(self):
        """Window contents as an array of shape (n_entries, dim)."""
        if not self._entries:
            raise DataError("window is empty")
        return np.stack([v for _, v in self._entries])


def pca_fit(window, threshold):
    """Fit principal components of the window's measurement vectors.

    The covariance is the population covariance of the window entries.
    Components with eigenvalue above ``threshold`` are retained in
    descending-eigenvalue order; if none qualifies, the single largest
    component is kept so the filter can still update.
    """
    if isinstance(window, MeasurementWindow):
        data = window.values()
    else:
        data = numerics.as_matrix(window, "window data")
    if data.shape[0] < 2:
        raise DataError(
            f"PCA fit needs at least 2 samples, window has {data.shape[0]}"
        )
    threshold = float(threshold)
    if threshold < 0.0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")

    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / data.shape[0]
    eigvals, eigvecs = numerics.eig_sym(cov)

    keep = np.flatnonzero(eigvals > threshold)
    if keep.size == 0:
        keep = np.array([0])
    return PcaModel(
        threshold=threshold,
        components=eigvecs[:, keep],
        eigenvalues=eigvals[keep],
        mean=mean,
    )


def pca_project(model, z):
    """Component-space coordinates of a measurement: V^T (z - mean)."""
    z = numerics.as_vector(z, "measurement")
    if z.size != model.input_dim:
        raise DimensionError(
            f"measurement has length {z.size}, expected {model.input_dim}"
        )
    return model.components.T @ (z - model.mean)


def _ekf_predict(state, model):
    f_jac = model.jacobian_f(state.x)
    x_prior = numerics.as_vector(model.f(state.x), "f(x)")
    p_prior = numerics.symmetrize(f_jac @ state.P @ f_jac.T + model.Q)
    return x_prior, p_prior


def _kfpca_ls_core(state, model, pca_model, z, prev_z_proj=None, fallback_h=None):
    """Least-squares KF-PCA step; returns (posterior, innovation, h).

    The component-space observation matrix is re-solved each step from
    the previous projected measurement and the previous posterior mean
    (``z'_{k-1} = h x_{k-1}``); on the first step the current projected
    measurement stands in.  A near-zero state mean falls back to the
    caller-supplied previous ``h`` (or a zero matrix, i.e. no update).
    """
    z_proj = pca_project(pca_model, z)
    n = state.dim
    kdim = pca_model.n_components

    ref_x = state.x
    ref_z = z_proj if prev_z_proj is None else np.asarray(prev_z_proj, dtype=float)
    if ref_z.size != kdim:
        raise DimensionError(
            f"previous projection has length {ref_z.size}, expected {kdim}"
        )
    if float(np.linalg.norm(ref_x)) < DEGENERATE_NORM:
        h_obs = np.zeros((kdim, n)) if fallback_h is None else fallback_h
    else:
        h_obs = numerics.least_squares((kdim, n), ref_x, ref_z)

    x_prior, p_prior = _ekf_predict(state, model)
    r_proj = pca_model.project_cov(model.R)
    gain, _ = innovation_gain(p_prior, h_obs, r_proj)
    innovation = z_proj - h_obs @ x_prior
    x_post = x_prior + gain @ innovation
    p_post = (np.eye(n) - gain @ h_obs) @ p_prior
    return _finish(x_post, p_post, state.k + 1), innovation, h_obs


def kfpca_step_ls(state, model, pca_model, z, prev_z_proj=None, fallback_h=None):
    """KF-PCA step, least-squares method: one predict+update on the
    PCA-projected measurement with a re-solved observation matrix."""
    return _kfpca_ls_core(state, model, pca_model, z, prev_z_proj, fallback_h)[0]


def _kfpca_lin_core(state, model, pca_model, z, lin_x=None):
    """Linearization KF-PCA step; returns (posterior, innovation).

    The composed measurement map ``pca_project(h(x))`` is linearized by
    central differences at ``lin_x`` (the previous posterior mean); when
    no history exists yet the current prior is used instead.
    """
    z_proj = pca_project(pca_model, z)
    x_prior, p_prior = _ekf_predict(state, model)
    lin_point = x_prior if lin_x is None else numerics.as_vector(lin_x, "lin_x")

    def composed(s):
        return pca_project(pca_model, numerics.as_vector(model.h(s), "h(x)"))

    h_lin = numerics.jacobian_fd(composed, lin_point, model.fd_step)
    r_proj = pca_model.project_cov(model.R)
    gain, _ = innovation_gain(p_prior, h_lin, r_proj)
    # first-order predicted measurement about the linearization point;
    # keeps the projection's centering offset in the innovation
    z_pred = composed(lin_point) + h_lin @ (x_prior - lin_point)
    innovation = z_proj - z_pred
    x_post = x_prior + gain @ innovation
    p_post = (np.eye(state.dim) - gain @ h_lin) @ p_prior
    return _finish(x_post, p_post, state.k + 1), innovation


def kfpca_step_lin(state, model, pca_model, z, lin_x=None):
    """KF-PCA step, linearization method: EKF-style update through the
    composed map ``pca_project . h`` linearized at a lagged point."""
    return _kfpca_lin_core(state, model, pca_model, z, lin_x)[0]


def _ukfpca_core(state, model, cfg, pca_model, z):
    """Unscented KF-PCA step; returns (posterior, innovation)."""
    z_proj = pca_project(pca_model, z)
    x_prior, p_prior = unscented_predict(state, model, cfg)
    r_proj = pca_model.project_cov(model.R)

    def composed(s):
        return pca_project(pca_model, numerics.as_vector(model.h(s), "h(x)"))

    x_post, p_post, innovation = unscented_update(
        x_prior, p_prior, cfg, composed, r_proj, z_proj
    )
    return _finish(x_post, p_post, state.k + 1), innovation


def ukfpca_step(state, model, cfg, pca_model, z):
    """UKF-PCA step: sigma points propagated through the composed
    measurement map ``pca_project . h``."""
    return _ukfpca_core(state, model, cfg, pca_model, z)[0]


@dataclass
class JointEstimate:
    """Paired-branch state of the joint innovation-correction estimator."""

    branch_ekf: StateEstimate
    branch_pca: StateEstimate
    selected: str
    eps_ekf: Optional[np.ndarray] = None
    eps_pca: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.selected not in ("ekf", "pca"):
            raise ValueError(f"selected must be 'ekf' or 'pca', got {self.selected!r}")
        if self.eps_ekf is not None and self.eps_pca is not None:
            ne = float(np.linalg.norm(self.eps_ekf))
            np_ = float(np.linalg.norm(self.eps_pca))
            picked_ekf = self.selected == "ekf"
            if picked_ekf != (ne <= np_):
                raise NumericError(
                    f"joint selection violated: selected={self.selected} "
                    f"but |eps_ekf|={ne:.6g}, |eps_pca|={np_:.6g}"
                )

    @property
    def state(self):
        return self.branch_ekf if self.selected == "ekf" else self.branch_pca


def joint_init(state):
    """Start a joint estimator with identical priors on both branches."""
    return JointEstimate(branch_ekf=state, branch_pca=state, selected="ekf")


def joint_step(state_j, model, pca_model, z, base="ekf", cfg=None):
    """Advance both branches one step and select by innovation norm.

    The raw branch runs an EKF (or UKF for ``base='ukf'``) on the raw
    measurement; the fused branch runs the matching PCA variant on the
    projected measurement.  The branch with the smaller Euclidean
    innovation norm is selected; ties go to the raw branch.  A branch
    that fails numerically is recorded and the other branch selected.
    """
    if base not in ("ekf", "ukf"):
        raise ValueError(f"base must be 'ekf' or 'ukf', got {base!r}")
    if base == "ukf" and cfg is None:
        raise ValueError("base='ukf' requires a UkfConfig")

    ekf_state = eps_ekf = None
    ekf_err = None
    try:
        if base == "ekf":
            ekf_state, eps_ekf = _ekf_core(state_j.branch_ekf, model, z)
        else:
            ekf_state, eps_ekf = _ukf_core(state_j.branch_ekf, model, cfg, z)
    except NumericError as exc:
        ekf_err = exc

    pca_state = eps_pca = None
    pca_err = None
    try:
        if base == "ekf":
            prev = state_j.branch_pca
            lin_x = prev.x if prev.k >= 2 else None
            pca_state, eps_pca = _kfpca_lin_core(prev, model, pca_model, z, lin_x)
        else:
            pca_state, eps_pca = _ukfpca_core(
                state_j.branch_pca, model, cfg, pca_model, z
            )
    except NumericError as exc:
        pca_err = exc

    if ekf_err is not None and pca_err is not None:
        raise NumericError(
            f"both joint branches failed: raw: {ekf_err}; fused: {pca_err}"
        )
    if ekf_err is not None:
        return JointEstimate(state_j.branch_ekf, pca_state, "pca", None, eps_pca)
    if pca_err is not None:
        return JointEstimate(ekf_state, state_j.branch_pca, "ekf", eps_ekf, None)

    selected = "ekf" if np.linalg.norm(eps_ekf) <= np.linalg.norm(eps_pca) else "pca"
    return JointEstimate(ekf_state, pca_state, selected, eps_ekf, eps_pca)
