"""Model layout and seeded initialization."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .params import ParamVector, _normalize_layout

GRU_FIELDS = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")

# (head name, hidden layer widths, output width)
HeadSpec = Sequence[tuple[str, Sequence[int], int]]


def model_layout(input_dim: int, hidden_dim: int, head_spec: HeadSpec):
    """GRU blocks in ``GRU_FIELDS`` order, then each head's layers."""
    layout = []
    for f in GRU_FIELDS:
        if f.startswith("W"):
            shape = (hidden_dim, input_dim)
        elif f.startswith("U"):
            shape = (hidden_dim, hidden_dim)
        else:
            shape = (hidden_dim,)
        layout.append((f"gru.{f}", shape))
    for name, widths, out_dim in head_spec:
        dims = [hidden_dim, *widths, out_dim]
        for i in range(len(dims) - 1):
            layout.append((f"{name}.{i}.W", (dims[i + 1], dims[i])))
            layout.append((f"{name}.{i}.b", (dims[i + 1],)))
    return _normalize_layout(layout)


def count_params(input_dim: int, hidden_dim: int, head_spec: HeadSpec) -> int:
    """Closed form: 3(F*hid + hid^2 + hid) plus every head layer's weights and biases."""
    n = 3 * (input_dim * hidden_dim + hidden_dim * hidden_dim + hidden_dim)
    for _, widths, out_dim in head_spec:
        dims = [hidden_dim, *widths, out_dim]
        n += sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))
    return n


def init_params(input_dim: int, hidden_dim: int, head_spec: HeadSpec, seed: int) -> ParamVector:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero."""
    layout = model_layout(input_dim, hidden_dim, head_spec)
    rng = np.random.default_rng(seed)
    theta = ParamVector.zeros(layout)
    for name, shape in layout:
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[1])
            theta.view(name)[...] = rng.uniform(-bound, bound, size=shape)
    return theta
