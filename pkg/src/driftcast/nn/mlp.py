"""Dense affine+activation chains."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass
class MlpParams:
    weights: list  # each (out, in)
    biases: list  # each (out,)
    activations: tuple = field(default=())

    def __post_init__(self):
        if not self.activations:
            self.activations = ("tanh",) * (len(self.weights) - 1) + ("identity",)
        self.check()

    def check(self) -> None:
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have equal length")
        if not self.weights:
            raise ValueError("an MLP needs at least one layer")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if self.activations[-1] != "identity":
            raise ValueError("final layer must use the identity activation")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"layer {i}: weight {W.shape} and bias {b.shape} do not match")
            if i and W.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i} expects {W.shape[1]} inputs, "
                                 f"previous layer emits {self.weights[i - 1].shape[0]}")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @classmethod
    def from_vector(cls, theta, prefix: str, n_layers: int, hidden_activation: str = "tanh"):
        weights = [theta.view(f"{prefix}.{i}.W") for i in range(n_layers)]
        biases = [theta.view(f"{prefix}.{i}.b") for i in range(n_layers)]
        acts = (hidden_activation,) * (n_layers - 1) + ("identity",)
        return cls(weights, biases, acts)


@dataclass
class MlpCache:
    params: MlpParams
    inputs: list  # input to each layer
    outputs: list  # post-activation output of each layer
    squeeze: bool


def _act(name, a):
    if name == "tanh":
        return np.tanh(a)
    if name == "relu":
        return np.maximum(a, 0.0)
    return a


def _act_grad(name, y, g):
    if name == "tanh":
        return g * (1.0 - y * y)
    if name == "relu":
        return g * (y > 0.0)
    return g


def mlp_forward(params: MlpParams, x):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != params.input_dim:
        raise ValueError(f"input has {a.shape[1]} features, MLP expects {params.input_dim}")
    inputs, outputs = [], []
    for W, b, act in zip(params.weights, params.biases, params.activations):
        inputs.append(a)
        a = _act(act, a @ W.T + b)
        outputs.append(a)
    cache = MlpCache(params, inputs, outputs, squeeze)
    return (a[0] if squeeze else a), cache


def mlp_backward(cache: MlpCache, grad_y):
    """Returns ``(grad_params, grad_x)``; weight gradients summed over the batch."""
    p = cache.params
    g = np.atleast_2d(np.asarray(grad_y, dtype=np.float64))
    if g.shape != cache.outputs[-1].shape:
        raise ValueError(f"grad_y shape {g.shape} does not match output {cache.outputs[-1].shape}")
    n = len(p.weights)
    gW, gb = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        g = _act_grad(p.activations[i], cache.outputs[i], g)
        gW[i] = g.T @ cache.inputs[i]
        gb[i] = g.sum(axis=0)
        g = g @ p.weights[i]
    grads = MlpParams(gW, gb, p.activations)
    return grads, (g[0] if cache.squeeze else g)
