"""Estimator-style wrappers (``fit`` / ``predict`` / ``get_params``) over the
functional core, for use alongside scikit-learn tooling.

Inputs are lists of :class:`~driftcast.forecaster.Sample` (or a ``(n, k, 7)``
window array for prediction); forecasts are ``(n, H, 2)`` position arrays.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    check_horizon, check_residuals, check_samples, check_stream, check_tasks, check_window,
)
from .baselines import cv_predict, kf_forecast, train_offline
from .drift import AdaptConfig, EwmaDetectorState, detector_update, run_stream
from .forecaster import ModelConfig, predict, stack_samples
from .meta import MetaConfig, inner_adapt, meta_train
from .metrics import ade


class _ForecasterMixin:
    """Shared scoring: negative mean ADE, so larger is better."""

    def score(self, X, y=None):
        samples = check_samples(X)
        pred = self.predict(samples)
        return -float(np.mean(ade(pred, np.stack([s.target_pos for s in samples]))))


class ConstantVelocityForecaster(_ForecasterMixin, BaseEstimator):
    def __init__(self, horizon: int = 3):
        self.horizon = horizon

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def predict(self, X):
        return np.stack([cv_predict(s, self.horizon) for s in check_samples(X)])


class KalmanForecaster(_ForecasterMixin, BaseEstimator):
    def __init__(self, horizon: int = 3, q: float = 0.1, r: float = 1.0):
        self.horizon = horizon
        self.q = q
        self.r = r

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def predict(self, X):
        return np.stack([kf_forecast(s, self.horizon, self.q, self.r)
                         for s in check_samples(X)])


class _GruBase(_ForecasterMixin, BaseEstimator):
    def _model_config(self) -> ModelConfig:
        return ModelConfig(k=self.k, H=self.horizon, hidden_dim=self.hidden_dim,
                           head_layers=tuple(self.head_layers), lambda_ho=self.lambda_ho,
                           n_beams=self.n_beams)

    def _check_inputs(self, X, train=False):
        samples = check_samples(X)
        check_window(samples, self.k)
        if train:
            check_horizon(samples, self.horizon)
        return samples

    def predict(self, X):
        """Forecast positions, shape ``(n, H, 2)``."""
        check_is_fitted(self, "theta_")
        return predict(self.theta_, self.config_, stack_samples(self._check_inputs(X))).pred_pos

    def predict_handover_proba(self, X):
        """Per-horizon-step handover probabilities, shape ``(n, H)``."""
        check_is_fitted(self, "theta_")
        logits = predict(self.theta_, self.config_, stack_samples(self._check_inputs(X))).ho_logits
        return 0.5 * (1.0 + np.tanh(0.5 * logits))

    @property
    def n_params_(self) -> int:
        check_is_fitted(self, "theta_")
        return len(self.theta_)


class GRUForecaster(_GruBase):
    """GRU forecaster trained on pooled samples with Adam."""

    def __init__(self, k: int = 10, horizon: int = 3, hidden_dim: int = 64,
                 head_layers=(64, 64), lambda_ho: float = 0.5, n_beams: int = 16,
                 epochs: int = 20, batch_size: int = 32, lr: float = 1e-3, random_state: int = 0):
        self.k = k
        self.horizon = horizon
        self.hidden_dim = hidden_dim
        self.head_layers = head_layers
        self.lambda_ho = lambda_ho
        self.n_beams = n_beams
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.random_state = random_state

    def fit(self, X, y=None):
        samples = self._check_inputs(X, train=True)
        self.config_ = self._model_config()
        theta0 = self.config_.init(self.random_state)
        self.theta_, self.loss_history_ = train_offline(
            theta0, self.config_, samples, self.epochs, self.batch_size, self.lr,
            self.random_state)
        return self


class MetaForecaster(_GruBase):
    """GRU initialization meta-trained over tasks (Reptile or first-order MAML).

    ``fit`` takes a list of :class:`~driftcast.mobility.Task`; ``adapt`` returns
    a copy fine-tuned on a few samples of a new task.
    """

    def __init__(self, method: str = "reptile", k: int = 10, horizon: int = 3,
                 hidden_dim: int = 64, head_layers=(64, 64), lambda_ho: float = 0.5,
                 n_beams: int = 16, inner_lr: float = 1e-2, inner_steps: int = 5,
                 meta_step: float = 0.1, iterations: int = 1000, task_batch: int = 5,
                 support_size: int = 10, query_size: int = 20, random_state: int = 0):
        self.method = method
        self.k = k
        self.horizon = horizon
        self.hidden_dim = hidden_dim
        self.head_layers = head_layers
        self.lambda_ho = lambda_ho
        self.n_beams = n_beams
        self.inner_lr = inner_lr
        self.inner_steps = inner_steps
        self.meta_step = meta_step
        self.iterations = iterations
        self.task_batch = task_batch
        self.support_size = support_size
        self.query_size = query_size
        self.random_state = random_state

    def _meta_config(self) -> MetaConfig:
        return MetaConfig(inner_lr=self.inner_lr, inner_steps=self.inner_steps,
                          meta_step=self.meta_step, iterations=self.iterations,
                          task_batch=self.task_batch, support_size=self.support_size,
                          query_size=self.query_size, seed=self.random_state)

    def fit(self, tasks, y=None, val_tasks=None):
        if self.method not in ("reptile", "fomaml"):
            raise ValueError(f"method must be 'reptile' or 'fomaml', got {self.method!r}")
        tasks = check_tasks(tasks)
        for t in tasks:
            self._check_inputs(t.samples, train=True)
        self.config_ = self._model_config()
        theta0 = self.config_.init(self.random_state)
        self.theta_, self.history_ = meta_train(
            theta0, self.config_, tasks, self._meta_config(), self.method,
            check_tasks(val_tasks, "val_tasks") if val_tasks else None)
        return self

    def adapt(self, support):
        """Few-shot copy: ``inner_steps`` SGD steps on ``support``."""
        check_is_fitted(self, "theta_")
        samples = self._check_inputs(support, train=True)
        out = self.__class__(**self.get_params())
        out.config_ = self.config_
        out.history_ = self.history_
        out.theta_ = inner_adapt(self.theta_, self.config_, samples, self.inner_lr,
                                 self.inner_steps)
        return out


class EwmaDriftDetector(BaseEstimator):
    """EWMA residual chart. ``fit`` resets the state and consumes residuals;
    ``partial_fit`` continues; ``triggers_`` records every decision."""

    def __init__(self, lam: float = 0.2, gamma: float = 2.0, window: int = 100,
                 warmup_min: int = 20, cooldown: int = 10):
        self.lam = lam
        self.gamma = gamma
        self.window = window
        self.warmup_min = warmup_min
        self.cooldown = cooldown

    def _reset(self):
        self.state_ = EwmaDetectorState(lam=self.lam, gamma=self.gamma, window=self.window,
                                        warmup_min=self.warmup_min, cooldown=self.cooldown)
        self.triggers_ = []
        self.statistic_ = []

    def fit(self, residuals, y=None):
        self._reset()
        return self.partial_fit(residuals)

    def partial_fit(self, residuals, y=None):
        if not hasattr(self, "state_"):
            self._reset()
        for r in check_residuals(residuals):
            self.state_, fired = detector_update(self.state_, r)
            self.triggers_.append(fired)
            self.statistic_.append(self.state_.s)
        return self

    def update(self, r: float) -> bool:
        self.partial_fit([r])
        return self.triggers_[-1]

    def predict(self, residuals):
        """Trigger flags for ``residuals`` from a fresh state (does not touch this one)."""
        det = EwmaDriftDetector(**self.get_params()).fit(residuals)
        return np.array(det.triggers_, dtype=bool)


class OnlineAdapter(BaseEstimator):
    """Streaming deployment of a fitted GRU-based forecaster with detector-driven
    compact updates (``policy="ewma"``), updates at every step (``"always"``)
    or none (``"never"``)."""

    def __init__(self, n_adapt: int = 10, k_steps: int = 5, lr: float = 1e-3,
                 lambda_reg: float = 1e-4, policy: str = "ewma", lam: float = 0.2,
                 gamma: float = 2.0, window: int = 100, warmup_min: int = 20,
                 cooldown: int = 10):
        self.n_adapt = n_adapt
        self.k_steps = k_steps
        self.lr = lr
        self.lambda_reg = lambda_reg
        self.policy = policy
        self.lam = lam
        self.gamma = gamma
        self.window = window
        self.warmup_min = warmup_min
        self.cooldown = cooldown

    def run(self, forecaster, stream):
        """Deploy ``forecaster`` over ``stream`` (Track or consecutive Samples);
        returns the per-step trace."""
        check_is_fitted(forecaster, "theta_")
        adapt = AdaptConfig(self.n_adapt, self.k_steps, self.lr, self.lambda_reg)
        det = EwmaDetectorState(lam=self.lam, gamma=self.gamma, window=self.window,
                                warmup_min=self.warmup_min, cooldown=self.cooldown)
        self.trace_ = run_stream(forecaster.theta_, forecaster.config_, check_stream(stream),
                                 adapt, det, self.policy)
        return self.trace_
