"""Comparison forecasters: constant velocity, Kalman filter, pooled offline GRU
and sliding-window fine-tuning."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .drift import AdaptConfig, StreamTrace, run_stream
from .forecaster import ModelConfig, Sample, grad_joint, stack_samples
from .nn import AdamState, ParamVector, adam_step

logger = logging.getLogger(__name__)


def _positions(window) -> np.ndarray:
    if isinstance(window, Sample):
        return window.window[:, 1:3]
    return np.asarray(window, dtype=np.float64).reshape(-1, 2)


def cv_predict(window, H: int = 3, dt: float = 1.0) -> np.ndarray:
    """Extrapolate the last observed velocity ``H`` steps ahead."""
    p = _positions(window)
    if len(p) < 2:
        raise ValueError("constant-velocity prediction needs at least two positions")
    v = (p[-1] - p[-2]) / dt
    tau = np.arange(1, H + 1)[:, None]
    return p[-1] + tau * dt * v


_F = np.array([[1.0, 0.0, 1.0, 0.0],
               [0.0, 1.0, 0.0, 1.0],
               [0.0, 0.0, 1.0, 0.0],
               [0.0, 0.0, 0.0, 1.0]])
_Hm = np.array([[1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0]])


def _process_noise(q: float) -> np.ndarray:
    # discrete white-noise acceleration, dt = 1, state order (x, y, vx, vy)
    Q = np.zeros((4, 4))
    for pos, vel in ((0, 2), (1, 3)):
        Q[pos, pos] = 0.25
        Q[pos, vel] = Q[vel, pos] = 0.5
        Q[vel, vel] = 1.0
    return q * Q


@dataclass(frozen=True)
class KalmanState:
    x: np.ndarray  # (x, y, vx, vy)
    P: np.ndarray
    q: float = 0.1
    r: float = 1.0

    @classmethod
    def init(cls, z, q: float = 0.1, r: float = 1.0, velocity_var: float = 1e9) -> "KalmanState":
        """Position from the first fix, diffuse prior on velocity."""
        z = np.asarray(z, dtype=np.float64)
        if not np.all(np.isfinite(z)):
            raise ValueError("non-finite observation")
        return cls(np.array([z[0], z[1], 0.0, 0.0]),
                   np.diag([r, r, velocity_var, velocity_var]), q, r)

    @property
    def position(self) -> np.ndarray:
        return self.x[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.x[2:]


def kf_step(state: KalmanState, z) -> KalmanState:
    """Constant-velocity predict (dt = 1) followed by a position update."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (2,) or not np.all(np.isfinite(z)):
        raise ValueError(f"observation must be two finite numbers, got {z}")
    x = _F @ state.x
    P = _F @ state.P @ _F.T + _process_noise(state.q)
    S = _Hm @ P @ _Hm.T + state.r * np.eye(2)
    K = np.linalg.solve(S, _Hm @ P).T
    x = x + K @ (z - _Hm @ x)
    I_KH = np.eye(4) - K @ _Hm
    P = I_KH @ P @ I_KH.T + state.r * K @ K.T  # Joseph form
    P = 0.5 * (P + P.T)
    return KalmanState(x, P, state.q, state.r)


def kf_predict(state: KalmanState, H: int) -> np.ndarray:
    """Propagate the mean ``H`` steps without updates."""
    out = np.empty((H, 2))
    x = state.x
    for i in range(H):
        x = _F @ x
        out[i] = x[:2]
    return out


def kf_filter(window, q: float = 0.1, r: float = 1.0) -> KalmanState:
    p = _positions(window)
    state = KalmanState.init(p[0], q, r)
    for z in p[1:]:
        state = kf_step(state, z)
    return state


def kf_forecast(window, H: int = 3, q: float = 0.1, r: float = 1.0) -> np.ndarray:
    """Filter over the window's positions, then forecast ``H`` steps."""
    return kf_predict(kf_filter(window, q, r), H)


def train_offline(theta0: ParamVector, config: ModelConfig, samples, epochs: int = 20,
                  batch_size: int = 32, lr: float = 1e-3, seed: int = 0,
                  beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Pooled mini-batch Adam training. Returns ``(theta, per-epoch mean loss)``."""
    batch = stack_samples(samples)
    n = len(batch)
    rng = np.random.default_rng(seed)
    theta = theta0.copy()
    state = AdamState.for_params(theta)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            mb = type(batch)(batch.windows[idx], batch.target_pos[idx], batch.target_ho[idx])
            loss, g = grad_joint(theta, config, mb)
            state, theta = adam_step(state, theta, g, lr, beta1, beta2, eps)
            losses.append(loss * len(idx))
        history.append(float(np.sum(losses) / n))
        logger.debug("offline epoch %d: loss %.5f", epoch, history[-1])
    return theta, history


def sliding_window_finetune(theta0: ParamVector, config: ModelConfig, stream, N: int = 10,
                            steps_per_tick: int = 1, lr: float = 1e-3) -> StreamTrace:
    """Adapt at every step on the latest ``N`` labelled samples, no detector, no regularizer."""
    return run_stream(theta0, config, stream,
                      AdaptConfig(n_adapt=N, k_steps=steps_per_tick, lr=lr, lambda_reg=0.0),
                      policy="always")
