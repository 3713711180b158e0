"""Plain SGD and Adam over ParamVectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import GradVector, ParamVector


def sgd_step(theta: ParamVector, grad: GradVector, lr: float) -> ParamVector:
    if grad.layout != theta.layout:
        raise ValueError("gradient layout does not match parameters")
    return theta.with_values(theta.values - lr * grad.values)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def for_params(cls, theta: ParamVector) -> "AdamState":
        return cls(np.zeros(len(theta)), np.zeros(len(theta)), 0)


def adam_step(state: AdamState, theta: ParamVector, grad: GradVector, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update. Returns ``(state', theta')``."""
    if grad.layout != theta.layout:
        raise ValueError("gradient layout does not match parameters")
    g = grad.values
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    new_theta = theta.with_values(theta.values - lr * m_hat / (np.sqrt(v_hat) + eps))
    return AdamState(m, v, t), new_theta
