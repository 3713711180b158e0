"""Small dense network kernel: GRU cell, MLP, optimizers, flat parameters."""

from .gru import (
    GruCache, GruCellParams, GruUnrollCache, gru_backward, gru_forward, gru_unroll_backward,
    gru_unroll_forward, sigmoid,
)
from .init import GRU_FIELDS, count_params, init_params, model_layout
from .mlp import MlpCache, MlpParams, mlp_backward, mlp_forward
from .optim import AdamState, adam_step, sgd_step
from .params import GradVector, ParamVector, add, l2_norm_sq, scale, sub

__all__ = [
    "AdamState", "GRU_FIELDS", "GradVector", "GruCache", "GruCellParams", "GruUnrollCache",
    "MlpCache",
    "MlpParams", "ParamVector", "adam_step", "add", "count_params", "gru_backward",
    "gru_forward", "init_params", "l2_norm_sq", "mlp_backward", "mlp_forward",
    "gru_unroll_backward", "gru_unroll_forward", "model_layout", "scale", "sgd_step",
    "sigmoid", "sub",
]
