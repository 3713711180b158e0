"""Gated recurrent unit cell with exact backward pass.

Inputs may be a single vector ``(input,)`` or a batch ``(batch, input)``;
weight gradients are summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(x):
    # tanh form cannot overflow
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class GruCellParams:
    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W_z.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_z.shape[0]

    def check(self) -> None:
        h, i = self.hidden_dim, self.input_dim
        for name in ("W_z", "W_r", "W_h"):
            if getattr(self, name).shape != (h, i):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(h, i)}")
        for name in ("U_z", "U_r", "U_h"):
            if getattr(self, name).shape != (h, h):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(h, h)}")
        for name in ("b_z", "b_r", "b_h"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(h,)}")

    @classmethod
    def from_vector(cls, theta, prefix: str = "gru") -> "GruCellParams":
        return cls(**{f: theta.view(f"{prefix}.{f}") for f in cls.__dataclass_fields__})

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "GruCellParams":
        h, i = hidden_dim, input_dim
        return cls(
            W_z=np.zeros((h, i)), W_r=np.zeros((h, i)), W_h=np.zeros((h, i)),
            U_z=np.zeros((h, h)), U_r=np.zeros((h, h)), U_h=np.zeros((h, h)),
            b_z=np.zeros(h), b_r=np.zeros(h), b_h=np.zeros(h),
        )


@dataclass
class GruCache:
    params: GruCellParams
    z: np.ndarray
    h_prev: np.ndarray
    z_g: np.ndarray
    r_g: np.ndarray
    h_cand: np.ndarray
    squeeze: bool


def gru_forward(params: GruCellParams, z, h_prev):
    """One GRU step. Returns ``(h_next, cache)``."""
    z = np.asarray(z, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    squeeze = z.ndim == 1
    z2 = np.atleast_2d(z)
    h2 = np.atleast_2d(h_prev)
    if z2.shape[1] != params.input_dim:
        raise ValueError(f"input has {z2.shape[1]} features, cell expects {params.input_dim}")
    if h2.shape[1] != params.hidden_dim:
        raise ValueError(f"hidden state has {h2.shape[1]} units, cell expects {params.hidden_dim}")
    if z2.shape[0] != h2.shape[0]:
        raise ValueError(f"batch mismatch: input {z2.shape[0]} vs hidden {h2.shape[0]}")

    z_g = sigmoid(z2 @ params.W_z.T + h2 @ params.U_z.T + params.b_z)
    r_g = sigmoid(z2 @ params.W_r.T + h2 @ params.U_r.T + params.b_r)
    h_cand = np.tanh(z2 @ params.W_h.T + (r_g * h2) @ params.U_h.T + params.b_h)
    h_next = (1.0 - z_g) * h2 + z_g * h_cand

    cache = GruCache(params, z2, h2, z_g, r_g, h_cand, squeeze)
    return (h_next[0] if squeeze else h_next), cache


def gru_backward(cache: GruCache, grad_h_next):
    """Backward through one step. Returns ``(grad_params, grad_z, grad_h_prev)``."""
    p = cache.params
    g = np.atleast_2d(np.asarray(grad_h_next, dtype=np.float64))
    if g.shape != cache.h_prev.shape:
        raise ValueError(f"grad_h_next shape {g.shape} does not match {cache.h_prev.shape}")
    z, h, z_g, r_g, hc = cache.z, cache.h_prev, cache.z_g, cache.r_g, cache.h_cand

    d_hc = g * z_g
    d_zg = g * (hc - h)
    d_ah = d_hc * (1.0 - hc * hc)
    d_az = d_zg * z_g * (1.0 - z_g)
    d_rh = d_ah @ p.U_h  # wrt (r_g * h)
    d_ar = d_rh * h * r_g * (1.0 - r_g)

    grad_z = d_az @ p.W_z + d_ar @ p.W_r + d_ah @ p.W_h
    grad_h = g * (1.0 - z_g) + d_az @ p.U_z + d_ar @ p.U_r + d_rh * r_g

    grads = GruCellParams(
        W_z=d_az.T @ z, W_r=d_ar.T @ z, W_h=d_ah.T @ z,
        U_z=d_az.T @ h, U_r=d_ar.T @ h, U_h=d_ah.T @ (r_g * h),
        b_z=d_az.sum(axis=0), b_r=d_ar.sum(axis=0), b_h=d_ah.sum(axis=0),
    )
    if cache.squeeze:
        return grads, grad_z[0], grad_h[0]
    return grads, grad_z, grad_h


@dataclass
class GruUnrollCache:
    params: GruCellParams
    x: np.ndarray  # (B, T, input)
    h_prev: np.ndarray  # (T, B, hidden)
    z_g: np.ndarray
    r_g: np.ndarray
    h_cand: np.ndarray


def gru_unroll_forward(params: GruCellParams, x, h0=None):
    """Run the cell over ``x`` of shape ``(B, T, input)``; returns ``(h_T, cache)``.

    Same arithmetic as repeated :func:`gru_forward`, with the input projections
    of all steps done in one product.
    """
    x = np.asarray(x, dtype=np.float64)
    B, T, n_in = x.shape
    if n_in != params.input_dim:
        raise ValueError(f"input has {n_in} features, cell expects {params.input_dim}")
    nh = params.hidden_dim
    h = np.zeros((B, nh)) if h0 is None else np.array(h0, dtype=np.float64)
    W = np.concatenate([params.W_z, params.W_r, params.W_h])
    b = np.concatenate([params.b_z, params.b_r, params.b_h])
    U_zr = np.concatenate([params.U_z, params.U_r])
    U_hT = params.U_h.T
    proj = x @ W.T + b  # (B, T, 3h)
    hs = np.empty((T, B, nh))
    zs = np.empty((T, B, nh))
    rs = np.empty((T, B, nh))
    cs = np.empty((T, B, nh))
    for t in range(T):
        hs[t] = h
        a = proj[:, t]
        zr = h @ U_zr.T
        z = 0.5 * (1.0 + np.tanh(0.5 * (a[:, :nh] + zr[:, :nh])))
        r = 0.5 * (1.0 + np.tanh(0.5 * (a[:, nh:2 * nh] + zr[:, nh:])))
        c = np.tanh(a[:, 2 * nh:] + (r * h) @ U_hT)
        h = (1.0 - z) * h + z * c
        zs[t], rs[t], cs[t] = z, r, c
    return h, GruUnrollCache(params, x, hs, zs, rs, cs)


def gru_unroll_backward(cache: GruUnrollCache, grad_h_last):
    """Backward through a whole unroll from the gradient at the final state.

    Returns ``(grad_params, grad_x, grad_h0)`` with parameter gradients summed
    over batch and time.
    """
    p = cache.params
    nh = p.hidden_dim
    T, B, _ = cache.h_prev.shape
    U_zr = np.concatenate([p.U_z, p.U_r])
    dh = np.array(grad_h_last, dtype=np.float64)
    d_proj = np.empty((B, T, 3 * nh))
    for t in range(T - 1, -1, -1):
        h, z, r, c = cache.h_prev[t], cache.z_g[t], cache.r_g[t], cache.h_cand[t]
        d_ac = dh * z * (1.0 - c * c)
        d_az = dh * (c - h) * z * (1.0 - z)
        d_rh = d_ac @ p.U_h
        d_ar = d_rh * h * r * (1.0 - r)
        d_proj[:, t, :nh] = d_az
        d_proj[:, t, nh:2 * nh] = d_ar
        d_proj[:, t, 2 * nh:] = d_ac
        dh = dh * (1.0 - z) + d_proj[:, t, :2 * nh] @ U_zr + d_rh * r
    flat_d = d_proj.reshape(B * T, 3 * nh)
    flat_x = cache.x.reshape(B * T, -1)
    gW = flat_d.T @ flat_x
    gb = flat_d.sum(axis=0)
    # hidden-to-hidden terms: stack (t, b) pairs
    hp = cache.h_prev.transpose(1, 0, 2).reshape(B * T, nh)
    rh = (cache.r_g * cache.h_prev).transpose(1, 0, 2).reshape(B * T, nh)
    gU_zr = flat_d[:, :2 * nh].T @ hp
    gU_h = flat_d[:, 2 * nh:].T @ rh
    grads = GruCellParams(
        W_z=gW[:nh], W_r=gW[nh:2 * nh], W_h=gW[2 * nh:],
        U_z=gU_zr[:nh], U_r=gU_zr[nh:], U_h=gU_h,
        b_z=gb[:nh], b_r=gb[nh:2 * nh], b_h=gb[2 * nh:],
    )
    grad_x = d_proj @ np.concatenate([p.W_z, p.W_r, p.W_h])
    return grads, grad_x, dh
