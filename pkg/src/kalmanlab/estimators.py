"""Streaming wrappers around the filter steps, keyed by estimator kind.

The comparison harness and the autoscaler both consume scalar
measurement streams (signal samples, reported latencies).  Each wrapper
owns the state a step function cannot: the delay-embedding buffer that
turns a scalar stream into measurement vectors, the sliding window and
refit cadence for PCA, the attention window, and the linearization
history.

Estimators track a scalar latent level with random-walk dynamics; the
embedded measurement vector observes that level through a broadcast
measurement map.  ``observe(t, z, update=False)`` runs a predict-only
step (covariance inflation without a measurement), which is how the
autoscaler realizes its fractional update rate.
"""

from collections import deque

import numpy as np

from . import attention as attn
from .baselines import passive_step
from .errors import DataError
from .filters import (
    NonlinearModel,
    StateEstimate,
    UkfConfig,
    ckf_step,
    ekf_step,
    ukf_step,
)
from .pca import (
    JointEstimate,
    MeasurementWindow,
    _kfpca_lin_core,
    _kfpca_ls_core,
    _ukfpca_core,
    identity_pca,
    joint_init,
    joint_step,
    pca_fit,
    pca_project,
)

VALID_KINDS = (
    "passive",
    "ekf",
    "ukf",
    "ckf",
    "ekf-pca",
    "ekf-pca-ls",
    "ukf-pca",
    "joint-ekf-pca",
    "joint-ukf-pca",
    "akf",
    "akf-pca",
)

DEFAULT_Q = 0.05
DEFAULT_R = 0.5
DEFAULT_EMBED = 4
DEFAULT_WINDOW = 16
DEFAULT_HIDDEN = 8


def level_model(embed_dim, q, r):
    """Random-walk level observed by ``embed_dim`` staggered copies."""
    ones = np.ones((embed_dim, 1))
    return NonlinearModel(
        f=lambda x: x,
        h=lambda x: np.full(embed_dim, x[0]),
        Q=np.array([[q]]),
        R=r * np.eye(embed_dim),
        jac_f=lambda x: np.eye(1),
        jac_h=lambda x: ones,
    )


class StreamEstimator:
    """Common surface: observe a scalar measurement, expose the level."""

    kind = "base"

    def __init__(self, label=None):
        self.label = label or self.kind
        self.steps = 0

    def observe(self, t, z, update=True):
        raise NotImplementedError

    def level(self):
        """Current estimate of the measured level."""
        raise NotImplementedError

    def predict_next(self):
        """One-step-ahead prediction of the next raw measurement."""
        return self.level()


class PassiveEstimator(StreamEstimator):
    kind = "passive"

    def __init__(self, label=None, **_ignored):
        super().__init__(label)
        self._last = None

    def observe(self, t, z, update=True):
        self.steps += 1
        self._last = float(passive_step(np.atleast_1d(z))[0])

    def level(self):
        if self._last is None:
            raise DataError("no measurement observed yet")
        return self._last


class _KalmanBase(StreamEstimator):
    """Shared init/predict-only plumbing for the Kalman wrappers."""

    def __init__(self, label, q, r, embed_dim):
        super().__init__(label)
        self.q = float(q)
        self.r = float(r)
        self.embed_dim = int(embed_dim)
        self.model = level_model(self.embed_dim, self.q, self.r)
        self.state = None
        self._embed = deque(maxlen=self.embed_dim)

    def _seed_state(self, z):
        self.state = StateEstimate(
            x=np.array([float(z)]), P=np.array([[self.r]]), k=0
        )

    def _embedded(self, z):
        if not self._embed:
            self._embed.extend([float(z)] * self.embed_dim)
        else:
            self._embed.append(float(z))
        # newest first: slot i holds the i-th most recent measurement
        return np.array(list(self._embed))[::-1]

    def _predict_only(self):
        # identity dynamics: the time update is pure covariance inflation
        self.state = StateEstimate(
            x=self.state.x, P=self.state.P + self.model.Q, k=self.state.k + 1
        )

    def level(self):
        if self.state is None:
            raise DataError("no measurement observed yet")
        return float(self.state.x[0])


class KalmanEstimator(_KalmanBase):
    """Plain EKF/UKF/CKF on the raw scalar measurement."""

    def __init__(self, kind, label=None, q=DEFAULT_Q, r=DEFAULT_R,
                 alpha=0.5, beta=2.0, kappa=0.0, **_ignored):
        self.kind = kind
        super().__init__(label, q, r, embed_dim=1)
        self.cfg = UkfConfig(n=1, alpha=alpha, beta=beta, kappa=kappa)

    def observe(self, t, z, update=True):
        self.steps += 1
        if self.state is None:
            self._seed_state(z)
            return
        if not update:
            self._predict_only()
            return
        meas = np.atleast_1d(float(z))
        if self.kind == "ekf":
            self.state = ekf_step(self.state, self.model, meas)
        elif self.kind == "ukf":
            self.state = ukf_step(self.state, self.model, self.cfg, meas)
        else:
            self.state = ckf_step(self.state, self.model, meas)


class _WindowedBase(_KalmanBase):
    """Adds the embedded measurement window and the PCA refit cadence."""

    def __init__(self, label, q, r, embed_dim, window, pca_threshold,
                 refit_every=None):
        super().__init__(label, q, r, embed_dim)
        self.window = MeasurementWindow(int(window))
        self.pca_threshold = float(pca_threshold)
        self.refit_every = int(refit_every) if refit_every else int(window)
        self.pca = identity_pca(self.embed_dim)
        self._pushes = 0
        self._fitted = False

    def _push(self, t, vec):
        self.window.push(t, vec)
        self._pushes += 1
        if len(self.window) >= 2 and self._pushes % self.refit_every == 0:
            self.pca = pca_fit(self.window, self.pca_threshold)
            self._fitted = True
            self._after_refit()

    def _after_refit(self):
        pass


class PcaEstimator(_WindowedBase):
    """EKF-PCA (linearization or least-squares) and UKF-PCA."""

    def __init__(self, kind, label=None, q=DEFAULT_Q, r=DEFAULT_R,
                 embed_dim=DEFAULT_EMBED, window=DEFAULT_WINDOW,
                 pca_threshold=0.0, refit_every=None,
                 alpha=0.5, beta=2.0, kappa=0.0, **_ignored):
        self.kind = kind
        super().__init__(label, q, r, embed_dim, window, pca_threshold,
                         refit_every)
        self.cfg = UkfConfig(n=1, alpha=alpha, beta=beta, kappa=kappa)
        self._prev_raw = None
        self._prev_proj = None
        self._prev_h = None

    def _after_refit(self):
        if self._prev_raw is not None:
            self._prev_proj = pca_project(self.pca, self._prev_raw)
        self._prev_h = None

    def observe(self, t, z, update=True):
        self.steps += 1
        vec = self._embedded(z)
        if self.state is None:
            self._seed_state(z)
            self._push(t, vec)
            self._prev_raw = vec
            self._prev_proj = pca_project(self.pca, vec)
            return
        if not update:
            self._predict_only()
            return
        self._push(t, vec)
        prev_x = self.state.x
        if self.kind == "ekf-pca-ls":
            est, _, h_used = _kfpca_ls_core(
                self.state, self.model, self.pca, vec,
                prev_z_proj=self._prev_proj, fallback_h=self._prev_h,
            )
            self._prev_h = h_used
        elif self.kind == "ukf-pca":
            est, _ = _ukfpca_core(self.state, self.model, self.cfg,
                                  self.pca, vec)
        else:
            lin_x = prev_x if self.state.k >= 2 else None
            est, _ = _kfpca_lin_core(self.state, self.model, self.pca, vec,
                                     lin_x=lin_x)
        self.state = est
        self._prev_raw = vec
        self._prev_proj = pca_project(self.pca, vec)


class JointEstimator(_WindowedBase):
    """Per-step innovation selection between a raw and a fused branch."""

    def __init__(self, kind, label=None, q=DEFAULT_Q, r=DEFAULT_R,
                 embed_dim=DEFAULT_EMBED, window=DEFAULT_WINDOW,
                 pca_threshold=0.0, refit_every=None,
                 alpha=0.5, beta=2.0, kappa=0.0, **_ignored):
        self.kind = kind
        super().__init__(label, q, r, embed_dim, window, pca_threshold,
                         refit_every)
        self.base = "ukf" if kind == "joint-ukf-pca" else "ekf"
        self.cfg = UkfConfig(n=1, alpha=alpha, beta=beta, kappa=kappa)
        self.joint = None

    def observe(self, t, z, update=True):
        self.steps += 1
        vec = self._embedded(z)
        if self.state is None:
            self._seed_state(z)
            self.joint = joint_init(self.state)
            self._push(t, vec)
            return
        if not update:
            self._predict_only()
            self.joint = JointEstimate(
                branch_ekf=StateEstimate(
                    self.joint.branch_ekf.x,
                    self.joint.branch_ekf.P + self.model.Q,
                    self.joint.branch_ekf.k + 1,
                ),
                branch_pca=StateEstimate(
                    self.joint.branch_pca.x,
                    self.joint.branch_pca.P + self.model.Q,
                    self.joint.branch_pca.k + 1,
                ),
                selected=self.joint.selected,
            )
            return
        self._push(t, vec)
        self.joint = joint_step(self.joint, self.model, self.pca, vec,
                                base=self.base, cfg=self.cfg)
        self.state = self.joint.state


class AttentionEstimator(_WindowedBase):
    """AKF / AKF-PCA: the EKF consumes attention-fused window measurements.

    Until the attention window fills, steps fall back to a plain EKF on
    the embedded measurement.  For the PCA variant, the PCA window is
    fed the fused measurements, matching the fused -> project -> update
    composition.
    """

    def __init__(self, kind, label=None, q=DEFAULT_Q, r=DEFAULT_R,
                 embed_dim=DEFAULT_EMBED, window=DEFAULT_WINDOW,
                 pca_threshold=0.0, refit_every=None,
                 attn_params=None, attn_hidden=DEFAULT_HIDDEN,
                 attn_window=DEFAULT_WINDOW, seed=0, **_ignored):
        self.kind = kind
        super().__init__(label, q, r, embed_dim, window, pca_threshold,
                         refit_every)
        if attn_params is None:
            attn_params = attn.attn_init(
                int(embed_dim), int(attn_hidden), int(attn_window), seed=seed
            )
        if attn_params.d_in != int(embed_dim):
            raise DataError(
                f"attention params d_in={attn_params.d_in} does not match "
                f"embed_dim={embed_dim}"
            )
        self.params = attn_params
        self.attn_window = MeasurementWindow(attn_params.window_len)

    def observe(self, t, z, update=True):
        self.steps += 1
        vec = self._embedded(z)
        if self.state is None:
            self._seed_state(z)
            self.attn_window.push(t, vec)
            if self.kind == "akf-pca":
                self._push(t, vec)
            return
        if not update:
            self._predict_only()
            return
        self.attn_window.push(t, vec)
        if not self.attn_window.full:
            fused = vec
        else:
            fused = attn.attn_forward(self.params, self.attn_window).z_fused
        if self.kind == "akf":
            self.state = ekf_step(self.state, self.model, fused)
        else:
            self._push(t, fused)
            lin_x = self.state.x if self.state.k >= 2 else None
            est, _ = _kfpca_lin_core(self.state, self.model, self.pca,
                                     fused, lin_x=lin_x)
            self.state = est


def make_estimator(kind, label=None, **params):
    """Build a streaming estimator by kind name.

    Unknown kinds raise :class:`DataError` listing the valid names.
    """
    if kind == "passive":
        return PassiveEstimator(label=label, **params)
    if kind in ("ekf", "ukf", "ckf"):
        return KalmanEstimator(kind, label=label, **params)
    if kind in ("ekf-pca", "ekf-pca-ls", "ukf-pca"):
        return PcaEstimator(kind, label=label, **params)
    if kind in ("joint-ekf-pca", "joint-ukf-pca"):
        return JointEstimator(kind, label=label, **params)
    if kind in ("akf", "akf-pca"):
        return AttentionEstimator(kind, label=label, **params)
    raise DataError(
        f"unknown estimator kind {kind!r}; valid kinds: {', '.join(VALID_KINDS)}"
    )
