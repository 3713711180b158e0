"""EWMA residual drift detection and regularized online adaptation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .forecaster import ModelConfig, Sample, grad_joint, predict, stack_samples
from .metrics import ade as _ade, fde as _fde
from .mobility import Track, make_samples
from .nn import ParamVector


def residual(p_true, p_pred) -> float:
    return float(np.linalg.norm(np.asarray(p_true, dtype=np.float64)
                                - np.asarray(p_pred, dtype=np.float64)))


@dataclass(frozen=True)
class EwmaDetectorState:
    lam: float = 0.2
    gamma: float = 2.0
    window: int = 100
    warmup_min: int = 20
    cooldown: int = 10
    s: float = 0.0
    ring: tuple = ()
    cooldown_remaining: int = 0
    # statistics used by the most recent update
    mu: float = math.nan
    sigma: float = math.nan

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError("EWMA decay must lie in (0, 1]")
        if self.window < 1 or self.warmup_min < 0 or self.cooldown < 0:
            raise ValueError("invalid detector window/warmup/cooldown")
        if len(self.ring) > self.window:
            raise ValueError("ring longer than the residual window")


def detector_update(state: EwmaDetectorState, r: float):
    """Feed one residual. Returns ``(state', triggered)``.

    The threshold ``mu + gamma * sigma`` uses the ring *before* ``r`` is appended
    (population standard deviation); the comparison is strict.
    """
    if not r >= 0:
        raise ValueError(f"residual must be a non-negative number, got {r}")
    s = state.lam * r + (1.0 - state.lam) * state.s
    if state.ring:
        ring = np.asarray(state.ring)
        mu, sigma = float(ring.mean()), float(ring.std())
    else:
        mu = sigma = math.nan
    triggered = (len(state.ring) >= state.warmup_min and state.cooldown_remaining == 0
                 and bool(s > mu + state.gamma * sigma))
    ring = (state.ring + (float(r),))[-state.window:]
    cooldown = state.cooldown if triggered else max(0, state.cooldown_remaining - 1)
    return replace(state, s=s, ring=ring, cooldown_remaining=cooldown, mu=mu, sigma=sigma), triggered


@dataclass(frozen=True)
class AdaptConfig:
    n_adapt: int = 10
    k_steps: int = 5
    lr: float = 1e-3
    lambda_reg: float = 1e-4

    def __post_init__(self):
        if self.n_adapt < 1 or self.k_steps < 0 or self.lr < 0 or self.lambda_reg < 0:
            raise ValueError("invalid adaptation config")


def compact_adapt(theta: ParamVector, theta_star: ParamVector, config: ModelConfig,
                  buffer: Sequence[Sample], cfg: AdaptConfig) -> ParamVector:
    """``k_steps`` SGD steps on buffer loss + ``lambda_reg * ||theta - theta_star||^2``."""
    if not len(buffer):
        raise ValueError("adaptation buffer is empty")
    if theta.layout != theta_star.layout:
        raise ValueError("theta and theta_star layouts differ")
    batch = stack_samples(buffer)
    for _ in range(cfg.k_steps):
        _, g = grad_joint(theta, config, batch)
        step = g.values + 2.0 * cfg.lambda_reg * (theta.values - theta_star.values)
        theta = theta.with_values(theta.values - cfg.lr * step)
    return theta


@dataclass
class StreamTrace:
    t: np.ndarray
    pred: np.ndarray  # (n, H, 2)
    ho_prob: np.ndarray  # (n, H)
    residual: np.ndarray  # nan where no previous prediction exists
    s: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    triggered: np.ndarray
    adapted: np.ndarray
    ade: np.ndarray
    fde: np.ndarray
    events: list = field(default_factory=list)
    theta: ParamVector | None = None

    def __len__(self):
        return len(self.t)

    @property
    def n_adaptations(self) -> int:
        return int(self.adapted.sum())

    def to_csv(self, path) -> None:
        write_trace_csv(self, path)


def trace_columns(H: int) -> list[str]:
    cols = ["step"]
    for tau in range(1, H + 1):
        cols += [f"pred_x{tau}", f"pred_y{tau}"]
    cols += ["residual", "s", "mu", "sigma", "triggered"]
    cols += [f"ho_prob{tau}" for tau in range(1, H + 1)]
    return cols


def write_trace_csv(trace: StreamTrace, path) -> None:
    H = trace.pred.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_columns(H))
        for i in range(len(trace)):
            row = [int(trace.t[i])]
            for tau in range(H):
                row += [repr(float(trace.pred[i, tau, 0])), repr(float(trace.pred[i, tau, 1]))]
            row += [repr(float(v)) for v in (trace.residual[i], trace.s[i], trace.mu[i],
                                             trace.sigma[i])]
            row.append(int(trace.triggered[i]))
            row += [repr(float(p)) for p in trace.ho_prob[i]]
            w.writerow(row)


def _as_samples(stream, config: ModelConfig):
    if isinstance(stream, Track):
        if len(stream) < config.k + config.H:
            raise ValueError(f"stream has {len(stream)} steps, needs at least k+H="
                             f"{config.k + config.H}")
        return make_samples(stream, config.k, config.H)
    samples = list(stream)
    if not samples:
        raise ValueError("stream shorter than k+H")
    times = [s.t for s in samples]
    if any(b - a != 1 for a, b in zip(times, times[1:])):
        raise ValueError("stream samples must be consecutive 1 Hz steps")
    return samples


def run_stream(theta_star: ParamVector, config: ModelConfig, stream,
               adapt: AdaptConfig = AdaptConfig(),
               detector: EwmaDetectorState = EwmaDetectorState(),
               policy: str = "ewma") -> StreamTrace:
    """Online deployment loop.

    At each step the current parameters forecast the next H positions; then the
    newly observed position gives the residual against the previous step's
    one-step forecast, the detector is updated, and on a trigger the model is
    adapted on the ``n_adapt`` most recent samples whose targets are fully
    observed. ``policy`` is ``"ewma"`` (detector-driven), ``"always"`` (adapt at
    every step once enough labelled samples exist) or ``"never"``.
    """
    if policy not in ("ewma", "always", "never"):
        raise ValueError(f"unknown policy {policy!r}")
    samples = _as_samples(stream, config)
    n, H = len(samples), config.H
    theta = theta_star.copy()
    state = detector
    out = dict(
        pred=np.empty((n, H, 2)), ho_prob=np.empty((n, H)), residual=np.full(n, np.nan),
        s=np.full(n, np.nan), mu=np.full(n, np.nan), sigma=np.full(n, np.nan),
        triggered=np.zeros(n, dtype=bool), adapted=np.zeros(n, dtype=bool),
        ade=np.empty(n), fde=np.empty(n),
    )
    events = []
    prev_one_step = None
    for i, sample in enumerate(samples):
        pred, logits = predict(theta, config, sample)
        out["pred"][i] = pred
        out["ho_prob"][i] = 0.5 * (1.0 + np.tanh(0.5 * logits))
        out["ade"][i] = _ade(pred, sample.target_pos)
        out["fde"][i] = _fde(pred, sample.target_pos)

        fire = False
        if prev_one_step is not None:
            r = residual(sample.anchor, prev_one_step)
            out["residual"][i] = r
            state, fire = detector_update(state, r)
            out["s"][i], out["mu"][i], out["sigma"][i] = state.s, state.mu, state.sigma
        prev_one_step = pred[0]
        out["triggered"][i] = fire

        if policy == "always":
            fire = True
        elif policy == "never":
            fire = False
        if fire:
            t = sample.t
            # consecutive steps: sample j's targets are observed once j + H <= i
            last = i - H
            labelled = samples[max(0, last - adapt.n_adapt + 1):last + 1] if last >= 0 else []
            if len(labelled) >= (adapt.n_adapt if policy == "always" else 1):
                theta = compact_adapt(theta, theta_star, config, labelled, adapt)
                out["adapted"][i] = True
                events.append({"t": t, "event": "adapt", "triggered": bool(out["triggered"][i]),
                               "buffer": len(labelled)})
    times = np.array([s.t for s in samples])
    return StreamTrace(times, events=events, theta=theta, **out)
