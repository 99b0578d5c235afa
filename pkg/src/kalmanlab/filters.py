"""Base state estimators: linear KF, extended KF, unscented KF, cubature KF.

All four are exposed as pure stepping functions ``*_step(state, model,
z) -> StateEstimate`` performing one predict+update cycle.  Covariances
are re-symmetrized after every step so the PSD invariant stays testable
over long runs.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import numerics
from .errors import DimensionError, NumericError

#: Tolerance for accepting a covariance as symmetric.
SYM_TOL = 1e-9

#: One-time diagonal jitter applied when a Cholesky factorization fails.
CHOL_JITTER = 1e-9


def _check_cov(m, name, dim=None):
    arr = numerics.as_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if np.max(np.abs(arr - arr.T)) > SYM_TOL:
        raise ValueError(f"{name} is not symmetric within {SYM_TOL}")
    return numerics.symmetrize(arr)


@dataclass
class StateEstimate:
    """Filter state: mean vector ``x``, covariance ``P``, step index ``k``."""

    x: np.ndarray
    P: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.x = numerics.as_vector(self.x, "state mean")
        self.P = _check_cov(self.P, "state covariance", dim=self.x.size)

    @property
    def dim(self):
        return self.x.size


@dataclass
class LinearModel:
    """Linear-Gaussian system: x' = A x + B v + w,  z = H x + e."""

    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    B: Optional[np.ndarray] = None

    def __post_init__(self):
        self.A = numerics.as_matrix(self.A, "A")
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise DimensionError(f"A must be square, got shape {self.A.shape}")
        self.H = numerics.as_matrix(self.H, "H")
        if self.H.shape[1] != n:
            raise DimensionError(
                f"H has {self.H.shape[1]} columns, expected state dimension {n}"
            )
        self.Q = _check_cov(self.Q, "Q", dim=n)
        self.R = _check_cov(self.R, "R", dim=self.H.shape[0])
        if self.B is not None:
            self.B = numerics.as_matrix(self.B, "B")
            if self.B.shape[0] != n:
                raise DimensionError(
                    f"B has {self.B.shape[0]} rows, expected state dimension {n}"
                )

    @property
    def state_dim(self):
        return self.A.shape[0]

    @property
    def meas_dim(self):
        return self.H.shape[0]


@dataclass
class NonlinearModel:
    """Nonlinear system: x' = f(x) + w,  z = h(x) + e.

    Jacobians default to central finite differences; callers with
    analytic derivatives can supply ``jac_f`` / ``jac_h``.
    """

    f: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    Q: np.ndarray
    R: np.ndarray
    jac_f: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jac_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = 1e-5

    def __post_init__(self):
        self.Q = _check_cov(self.Q, "Q")
        self.R = _check_cov(self.R, "R")

    @property
    def state_dim(self):
        return self.Q.shape[0]

    @property
    def meas_dim(self):
        return self.R.shape[0]

    def jacobian_f(self, x):
        if self.jac_f is not None:
            return numerics.as_matrix(self.jac_f(x), "jac_f(x)")
        return numerics.jacobian_fd(self.f, x, self.fd_step)

    def jacobian_h(self, x):
        if self.jac_h is not None:
            return numerics.as_matrix(self.jac_h(x), "jac_h(x)")
        return numerics.jacobian_fd(self.h, x, self.fd_step)


@dataclass
class UkfConfig:
    """Scaled unscented transform parameters."""

    n: int
    alpha: float = 0.5
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"state dimension must be >= 1, got {self.n}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        lam = self.lam
        if not np.isfinite(lam) or self.n + lam <= 0.0:
            raise ValueError(f"invalid scaling: n + lambda = {self.n + lam}")

    @property
    def lam(self):
        return self.alpha**2 * (self.kappa + self.n) - self.n

    def weights(self):
        """Mean and covariance weights, each of length 2n+1."""
        n, lam = self.n, self.lam
        wm = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
        wc = wm.copy()
        wm[0] = lam / (n + lam)
        wc[0] = lam / (n + lam) + 1.0 - self.alpha**2 + self.beta
        return wm, wc


def cholesky_psd(p, name="covariance"):
    """Lower Cholesky factor with a one-time diagonal jitter on failure."""
    try:
        return np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(p + CHOL_JITTER * np.eye(p.shape[0]))
    except np.linalg.LinAlgError:
        raise NumericError(
            f"{name} is not positive definite (Cholesky failed after "
            f"{CHOL_JITTER:g} jitter)"
        ) from None


def innovation_gain(p_prior, h_mat, r):
    """Kalman gain K = P- H^T S^{-1} with S = H P- H^T + R.

    Raises :class:`NumericError` naming the innovation covariance when S
    is not positive definite.
    """
    s = numerics.symmetrize(h_mat @ p_prior @ h_mat.T + r)
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise NumericError(
            "innovation covariance H P- H^T + R is not positive definite"
        ) from None
    k = np.linalg.solve(s, h_mat @ p_prior).T
    return k, s


def _finish(x, p, k_index):
    return StateEstimate(x=x, P=numerics.symmetrize(p), k=k_index)


def kf_step(state, model, z, v=None):
    """One linear Kalman predict+update.

    ``v`` is the optional state-noise input multiplied by ``model.B``
    (zero when omitted).
    """
    z = numerics.as_vector(z, "measurement")
    if z.size != model.meas_dim:
        raise DimensionError(
            f"measurement has length {z.size}, expected {model.meas_dim}"
        )
    x_prior = model.A @ state.x
    if v is not None:
        if model.B is None:
            raise DimensionError("model has no B matrix but v was supplied")
        x_prior = x_prior + model.B @ numerics.as_vector(v, "v")
    p_prior = numerics.symmetrize(model.A @ state.P @ model.A.T + model.Q)

    gain, _ = innovation_gain(p_prior, model.H, model.R)
    innovation = z - model.H @ x_prior
    x_post = x_prior + gain @ innovation
    p_post = (np.eye(state.dim) - gain @ model.H) @ p_prior
    return _finish(x_post, p_post, state.k + 1)


def _ekf_core(state, model, z):
    """EKF step returning (posterior, innovation) for joint-branch reuse."""
    z = numerics.as_vector(z, "measurement")
    f_jac = model.jacobian_f(state.x)
    x_prior = numerics.as_vector(model.f(state.x), "f(x)")
    p_prior = numerics.symmetrize(f_jac @ state.P @ f_jac.T + model.Q)

    h_jac = model.jacobian_h(x_prior)
    z_pred = numerics.as_vector(model.h(x_prior), "h(x-)")
    if z.size != z_pred.size:
        raise DimensionError(
            f"measurement has length {z.size}, expected {z_pred.size}"
        )
    gain, _ = innovation_gain(p_prior, h_jac, model.R)
    innovation = z - z_pred
    x_post = x_prior + gain @ innovation
    p_post = (np.eye(state.dim) - gain @ h_jac) @ p_prior
    return _finish(x_post, p_post, state.k + 1), innovation


def ekf_step(state, model, z):
    """One extended Kalman step: linearize f and h at the current estimate."""
    return _ekf_core(state, model, z)[0]


def sigma_points(x, p, scale):
    """Symmetric sigma set: x, then x +/- columns of chol(scale * P)."""
    n = x.size
    root = cholesky_psd(scale * p, "sigma-point covariance")
    pts = np.empty((2 * n + 1, n))
    pts[0] = x
    for i in range(n):
        pts[1 + i] = x + root[:, i]
        pts[1 + n + i] = x - root[:, i]
    return pts


def _propagate(points, fn):
    out0 = numerics.as_vector(fn(points[0]), "propagated point")
    out = np.empty((points.shape[0], out0.size))
    out[0] = out0
    for i in range(1, points.shape[0]):
        out[i] = numerics.as_vector(fn(points[i]), "propagated point")
    return out


def unscented_update(x_prior, p_prior, cfg, h_fn, r, z):
    """Measurement update of the scaled unscented transform.

    Sigma points are redrawn at the prior, pushed through ``h_fn``, and
    combined with the configured weights.  Shared by the UKF and the
    PCA-composed UKF, which differ only in ``h_fn`` and measurement
    space.
    """
    wm, wc = cfg.weights()
    pts = sigma_points(x_prior, p_prior, cfg.n + cfg.lam)
    zpts = _propagate(pts, h_fn)
    z_pred = wm @ zpts
    dz = zpts - z_pred
    s = numerics.symmetrize((dz.T * wc) @ dz + r)
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise NumericError(
            "innovation covariance of the unscented update is not positive definite"
        ) from None
    dx = pts - x_prior
    p_xz = (dx.T * wc) @ dz
    gain = np.linalg.solve(s, p_xz.T).T
    x_post = x_prior + gain @ (z - z_pred)
    p_post = p_prior - gain @ s @ gain.T
    return x_post, p_post, z - z_pred


def unscented_predict(state, model, cfg):
    """Sigma-point time update: returns the prior mean and covariance."""
    if cfg.n != state.dim:
        raise DimensionError(
            f"UkfConfig.n = {cfg.n} does not match state dimension {state.dim}"
        )
    wm, wc = cfg.weights()
    pts = sigma_points(state.x, state.P, cfg.n + cfg.lam)
    fpts = _propagate(pts, model.f)
    x_prior = wm @ fpts
    dx = fpts - x_prior
    p_prior = numerics.symmetrize((dx.T * wc) @ dx + model.Q)
    return x_prior, p_prior


def _ukf_core(state, model, cfg, z):
    """UKF step returning (posterior, innovation) for joint-branch reuse."""
    z = numerics.as_vector(z, "measurement")
    x_prior, p_prior = unscented_predict(state, model, cfg)
    x_post, p_post, innovation = unscented_update(
        x_prior, p_prior, cfg, model.h, model.R, z
    )
    return _finish(x_post, p_post, state.k + 1), innovation


def ukf_step(state, model, cfg, z):
    """One unscented Kalman step (2n+1 scaled sigma points)."""
    return _ukf_core(state, model, cfg, z)[0]


def cubature_points(x, p):
    """Spherical-radial cubature set: x +/- columns of chol(n * P)."""
    n = x.size
    root = cholesky_psd(float(n) * p, "cubature covariance")
    pts = np.empty((2 * n, n))
    for i in range(n):
        pts[i] = x + root[:, i]
        pts[n + i] = x - root[:, i]
    return pts


def ckf_step(state, model, z):
    """One cubature Kalman step (2n equal-weight points)."""
    z = numerics.as_vector(z, "measurement")
    pts = cubature_points(state.x, state.P)
    fpts = _propagate(pts, model.f)
    x_prior = fpts.mean(axis=0)
    dx = fpts - x_prior
    p_prior = numerics.symmetrize(dx.T @ dx / pts.shape[0] + model.Q)

    pts2 = cubature_points(x_prior, p_prior)
    zpts = _propagate(pts2, model.h)
    z_pred = zpts.mean(axis=0)
    dz = zpts - z_pred
    s = numerics.symmetrize(dz.T @ dz / pts2.shape[0] + model.R)
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise NumericError(
            "innovation covariance of the cubature update is not positive definite"
        ) from None
    dx2 = pts2 - x_prior
    p_xz = dx2.T @ dz / pts2.shape[0]
    gain = np.linalg.solve(s, p_xz.T).T
    x_post = x_prior + gain @ (z - z_pred)
    p_post = p_prior - gain @ s @ gain.T
    return _finish(x_post, p_post, state.k + 1)
