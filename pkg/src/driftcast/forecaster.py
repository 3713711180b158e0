"""GRU encoder with trajectory and handover heads, joint loss and checkpoints."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np

from .nn import (
    GruCellParams, MlpParams, ParamVector, count_params, gru_unroll_backward,
    gru_unroll_forward, init_params, mlp_backward, mlp_forward, model_layout,
)

# columns of a raw window row
T, X, Y, RSRP, BEAM, SPEED, HEADING = range(7)
N_RAW = 7
N_FEATURES = 7


@dataclass(frozen=True)
class Observation:
    t: int
    x: float
    y: float
    rsrp: float
    beam: int
    speed: float
    heading: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"speed must be non-negative, got {self.speed}")
        if not -math.pi < self.heading <= math.pi:
            raise ValueError(f"heading {self.heading} outside (-pi, pi]")
        if self.beam < 0:
            raise ValueError(f"beam index must be non-negative, got {self.beam}")

    @property
    def p(self) -> tuple[float, float]:
        return (self.x, self.y)

    def as_row(self) -> list[float]:
        return [self.t, self.x, self.y, self.rsrp, self.beam, self.speed, self.heading]


@dataclass
class Sample:
    """A window of k raw observations plus the next H positions and HO labels.

    ``window`` rows are ``(t, x, y, rsrp, beam, speed, heading)``. ``cell`` is the
    serving cell at the last window step (-1 when unknown); ``target_cells`` the
    serving cells over the horizon, when known.
    """

    window: np.ndarray
    target_pos: np.ndarray
    target_ho: np.ndarray
    tile_id: int = -1
    cell: int = -1
    target_cells: np.ndarray | None = None

    def __post_init__(self):
        self.window = np.asarray(self.window, dtype=np.float64)
        self.target_pos = np.asarray(self.target_pos, dtype=np.float64)
        self.target_ho = np.asarray(self.target_ho, dtype=np.float64)
        if self.window.ndim != 2 or self.window.shape[1] != N_RAW:
            raise ValueError(f"window must be (k, {N_RAW}), got {self.window.shape}")
        if self.target_pos.ndim != 2 or self.target_pos.shape[1] != 2:
            raise ValueError(f"target_pos must be (H, 2), got {self.target_pos.shape}")
        if self.target_ho.shape != (self.target_pos.shape[0],):
            raise ValueError("target_ho length must equal target_pos length")
        if self.window.shape[0] >= 2 and not np.all(np.diff(self.window[:, T]) == 1):
            raise ValueError("window timestamps must be contiguous at 1 Hz")

    @classmethod
    def from_observations(cls, observations: Sequence[Observation], target_pos, target_ho,
                          **kw) -> "Sample":
        return cls(np.array([o.as_row() for o in observations]), target_pos, target_ho, **kw)

    @property
    def k(self) -> int:
        return self.window.shape[0]

    @property
    def H(self) -> int:
        return self.target_pos.shape[0]

    @property
    def t(self) -> int:
        return int(self.window[-1, T])

    @property
    def anchor(self) -> np.ndarray:
        return self.window[-1, X:Y + 1]

    @property
    def observations(self) -> list[Observation]:
        return [Observation(int(r[T]), r[X], r[Y], r[RSRP], int(r[BEAM]), r[SPEED], r[HEADING])
                for r in self.window]

    def shifted(self, dx: float, dy: float) -> "Sample":
        w = self.window.copy()
        w[:, X] += dx
        w[:, Y] += dy
        return Sample(w, self.target_pos + [dx, dy], self.target_ho.copy(), self.tile_id,
                      self.cell, self.target_cells)


class SampleBatch(NamedTuple):
    windows: np.ndarray  # (B, k, 7)
    target_pos: np.ndarray  # (B, H, 2)
    target_ho: np.ndarray  # (B, H)

    def __len__(self):
        return self.windows.shape[0]


def stack_samples(samples) -> SampleBatch:
    if isinstance(samples, SampleBatch):
        return samples
    if isinstance(samples, Sample):
        samples = [samples]
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to stack")
    return SampleBatch(np.stack([s.window for s in samples]),
                       np.stack([s.target_pos for s in samples]),
                       np.stack([s.target_ho for s in samples]))


@dataclass(frozen=True)
class ModelConfig:
    k: int = 10
    H: int = 3
    hidden_dim: int = 64
    head_layers: tuple = (64, 64)
    lambda_ho: float = 0.5
    n_beams: int = 16
    s_pos: float = 100.0
    c_rsrp: float = -90.0
    s_rsrp: float = 20.0
    s_speed: float = 10.0
    s_out: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "head_layers", tuple(int(w) for w in self.head_layers))
        if self.H < 1:
            raise ValueError(f"H must be >= 1, got {self.H}")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.hidden_dim < 1 or any(w < 1 for w in self.head_layers):
            raise ValueError("layer widths must be positive")
        if self.n_beams < 2:
            raise ValueError("n_beams must be >= 2")
        for name in ("s_pos", "s_rsrp", "s_speed", "s_out"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lambda_ho < 0:
            raise ValueError("lambda_ho must be non-negative")

    @property
    def head_spec(self):
        return (("traj", self.head_layers, 2 * self.H), ("ho", self.head_layers, self.H))

    @property
    def n_head_layers(self) -> int:
        return len(self.head_layers) + 1

    def layout(self):
        return model_layout(N_FEATURES, self.hidden_dim, self.head_spec)

    def n_params(self) -> int:
        return count_params(N_FEATURES, self.hidden_dim, self.head_spec)

    def init(self, seed: int) -> ParamVector:
        return init_params(N_FEATURES, self.hidden_dim, self.head_spec, seed)

    def to_dict(self) -> dict:
        return asdict(self)


class ForecastOutput(NamedTuple):
    pred_pos: np.ndarray  # (H, 2) or (B, H, 2), absolute metres
    ho_logits: np.ndarray  # (H,) or (B, H)


# ---------------------------------------------------------------------------
# featurization


def featurize_windows(windows: np.ndarray, config: ModelConfig):
    """Batched featurization: ``(B, k, 7)`` raw rows -> ``(B, k, 7)`` features, anchors ``(B, 2)``."""
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 3 or w.shape[2] != N_RAW:
        raise ValueError(f"windows must be (B, k, {N_RAW}), got {w.shape}")
    if w.shape[1] < config.k:
        raise ValueError(f"window has {w.shape[1]} observations, model needs k={config.k}")
    w = w[:, -config.k:]
    anchor = w[:, -1, X:Y + 1]
    feats = np.empty(w.shape[:2] + (N_FEATURES,))
    feats[..., 0:2] = (w[..., X:Y + 1] - anchor[:, None, :]) / config.s_pos
    feats[..., 2] = (w[..., RSRP] - config.c_rsrp) / config.s_rsrp
    feats[..., 3] = w[..., BEAM] / (config.n_beams - 1)
    feats[..., 4] = w[..., SPEED] / config.s_speed
    feats[..., 5] = np.sin(w[..., HEADING])
    feats[..., 6] = np.cos(w[..., HEADING])
    return feats, anchor.copy()


def featurize(window, config: ModelConfig):
    """Features ``(k, 7)`` and anchor (last observed position) for one window."""
    if isinstance(window, Sample):
        window = window.window
    elif len(window) and isinstance(window[0], Observation):
        window = np.array([o.as_row() for o in window])
    feats, anchor = featurize_windows(np.asarray(window)[None], config)
    return feats[0], anchor[0]


# ---------------------------------------------------------------------------
# forward / backward


def _check_theta(theta: ParamVector, config: ModelConfig) -> None:
    if theta.layout != config.layout():
        raise ValueError("parameter layout does not match the model config")


def _forward_batch(theta: ParamVector, config: ModelConfig, windows: np.ndarray):
    feats, anchor = featurize_windows(windows, config)
    gru = GruCellParams.from_vector(theta)
    traj = MlpParams.from_vector(theta, "traj", config.n_head_layers)
    ho = MlpParams.from_vector(theta, "ho", config.n_head_layers)
    B = feats.shape[0]
    h, gru_cache = gru_unroll_forward(gru, feats)
    disp, traj_cache = mlp_forward(traj, h)
    logits, ho_cache = mlp_forward(ho, h)
    pred = anchor[:, None, :] + config.s_out * disp.reshape(B, config.H, 2)
    return pred, logits, (gru_cache, traj_cache, ho_cache)


def _backward_batch(theta: ParamVector, config: ModelConfig, cache, d_pred, d_logits):
    gru_cache, traj_cache, ho_cache = cache
    B = d_pred.shape[0]
    grad = theta.zeros_like()
    g_traj, dh_traj = mlp_backward(traj_cache, config.s_out * d_pred.reshape(B, 2 * config.H))
    g_ho, dh_ho = mlp_backward(ho_cache, d_logits)
    for prefix, g in (("traj", g_traj), ("ho", g_ho)):
        for i, (gW, gb) in enumerate(zip(g.weights, g.biases)):
            grad.view(f"{prefix}.{i}.W")[...] = gW
            grad.view(f"{prefix}.{i}.b")[...] = gb
    g_gru, _, _ = gru_unroll_backward(gru_cache, dh_traj + dh_ho)
    for f in GruCellParams.__dataclass_fields__:
        grad.view(f"gru.{f}")[...] = getattr(g_gru, f)
    return grad


def forward(theta: ParamVector, config: ModelConfig, sample):
    """Predict absolute positions and HO logits; returns ``(ForecastOutput, cache)``.

    Accepts a single Sample (or raw ``(k, 7)`` window) or a batch.
    """
    _check_theta(theta, config)
    if isinstance(sample, Sample):
        windows, single = sample.window[None], True
    elif isinstance(sample, SampleBatch):
        windows, single = sample.windows, False
    elif isinstance(sample, np.ndarray):
        single = sample.ndim == 2
        windows = sample[None] if single else sample
    else:
        windows, single = stack_samples(sample).windows, False
    pred, logits, cache = _forward_batch(theta, config, windows)
    if single:
        return ForecastOutput(pred[0], logits[0]), cache
    return ForecastOutput(pred, logits), cache


def predict(theta: ParamVector, config: ModelConfig, samples) -> ForecastOutput:
    return forward(theta, config, samples)[0]


# ---------------------------------------------------------------------------
# losses


def loss_traj(pred_pos, target_pos) -> float:
    """Mean over the horizon of squared Euclidean error (m^2)."""
    d = np.asarray(pred_pos, dtype=np.float64) - np.asarray(target_pos, dtype=np.float64)
    return float(np.mean(np.sum(d * d, axis=-1)))


def _bce_with_logits(s, h):
    # log(1 + e^s) - h*s in a form that never overflows
    return np.maximum(s, 0.0) - s * h + np.log1p(np.exp(-np.abs(s)))


def loss_ho(ho_logits, target_ho) -> float:
    """Mean binary cross-entropy of HO logits against 0/1 labels."""
    s = np.asarray(ho_logits, dtype=np.float64)
    h = np.asarray(target_ho, dtype=np.float64)
    return float(np.mean(_bce_with_logits(s, h)))


def loss_joint(sample, output: ForecastOutput, lambda_ho: float = 0.5,
               traj_scale: float = 1.0) -> float:
    """``loss_traj / traj_scale**2 + lambda_ho * loss_ho``.

    ``traj_scale`` expresses the trajectory term in units of that many metres;
    training uses the model's ``s_out``.
    """
    return (loss_traj(output.pred_pos, sample.target_pos) / traj_scale ** 2
            + lambda_ho * loss_ho(output.ho_logits, sample.target_ho))


def objective(theta: ParamVector, config: ModelConfig, samples) -> float:
    """Mean training loss over samples (no gradient)."""
    batch = stack_samples(samples)
    _check_theta(theta, config)
    pred, logits, _ = _forward_batch(theta, config, batch.windows)
    d = pred - batch.target_pos
    per = (np.mean(np.sum(d * d, axis=-1), axis=1) / config.s_out ** 2
           + config.lambda_ho * np.mean(_bce_with_logits(logits, batch.target_ho), axis=1))
    return float(np.mean(per))


def grad_joint(theta: ParamVector, config: ModelConfig, samples):
    """Mean joint loss over ``samples`` and its exact gradient w.r.t. ``theta``."""
    batch = stack_samples(samples)
    _check_theta(theta, config)
    B, H = batch.target_ho.shape
    pred, logits, cache = _forward_batch(theta, config, batch.windows)
    d = pred - batch.target_pos
    bce = _bce_with_logits(logits, batch.target_ho)
    sq = np.sum(d * d, axis=-1)
    loss = float(np.mean(np.mean(sq, axis=1) / config.s_out ** 2
                         + config.lambda_ho * np.mean(bce, axis=1)))
    d_pred = 2.0 * d / (B * H * config.s_out ** 2)
    prob = 0.5 * (1.0 + np.tanh(0.5 * logits))
    d_logits = config.lambda_ho * (prob - batch.target_ho) / (B * H)
    return loss, _backward_batch(theta, config, cache, d_pred, d_logits)


# ---------------------------------------------------------------------------
# checkpoints

CKPT_HEADER = "DRIFTCAST-CKPT"
CKPT_VERSION = "v1"


class CheckpointError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _config_items(config: ModelConfig):
    for f in fields(ModelConfig):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        yield f.name, repr(v) if isinstance(v, float) else str(v)


def _parse_config_value(name: str, raw: str, line: int):
    ftype = {f.name: f.default for f in fields(ModelConfig)}[name]
    try:
        if isinstance(ftype, tuple):
            return tuple(int(x) for x in raw.split(",") if x)
        if isinstance(ftype, bool):
            return raw == "True"
        if isinstance(ftype, int):
            return int(raw)
        return float(raw)
    except ValueError:
        raise CheckpointError(f"bad value {raw!r} for {name}", line) from None


def save_checkpoint(theta: ParamVector, config: ModelConfig, path) -> None:
    _check_theta(theta, config)
    lines = [f"{CKPT_HEADER} {CKPT_VERSION}"]
    lines += [f"{k}={v}" for k, v in _config_items(config)]
    lines.append(f"layout {len(theta.layout)}")
    lines += [" ".join([name, *map(str, shape)]) for name, shape in theta.layout]
    lines.append(f"values {len(theta)}")
    lines += [repr(float(v)) for v in theta.values]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; raises CheckpointError naming the bad line."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise CheckpointError("empty checkpoint", 1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != CKPT_HEADER:
        raise CheckpointError(f"not a checkpoint header: {lines[0]!r}", 1)
    if head[1] != CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {head[1]!r} "
                              f"(expected {CKPT_VERSION})", 1)
    known = {f.name for f in fields(ModelConfig)}
    cfg = {}
    i = 1
    while i < len(lines) and "=" in lines[i]:
        key, _, raw = lines[i].partition("=")
        if key not in known:
            raise CheckpointError(f"unknown config key {key!r}", i + 1)
        cfg[key] = _parse_config_value(key, raw, i + 1)
        i += 1
    try:
        config = ModelConfig(**cfg)
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid config: {exc}", i) from None

    def section(name):
        nonlocal i
        if i >= len(lines):
            raise CheckpointError(f"missing '{name}' section (file truncated)", i + 1)
        parts = lines[i].split()
        if len(parts) != 2 or parts[0] != name or not parts[1].isdigit():
            raise CheckpointError(f"expected '{name} <count>', got {lines[i]!r}", i + 1)
        i += 1
        return int(parts[1])

    n_layout = section("layout")
    layout = []
    for _ in range(n_layout):
        if i >= len(lines):
            raise CheckpointError("layout truncated", i + 1)
        parts = lines[i].split()
        try:
            layout.append((parts[0], tuple(int(s) for s in parts[1:])))
        except (IndexError, ValueError):
            raise CheckpointError(f"malformed layout entry {lines[i]!r}", i + 1) from None
        i += 1
    n_values = section("values")
    if i + n_values > len(lines):
        raise CheckpointError(f"expected {n_values} values, file ends after "
                              f"{len(lines) - i}", len(lines) + 1)
    values = np.empty(n_values)
    for j in range(n_values):
        try:
            values[j] = float(lines[i])
        except ValueError:
            raise CheckpointError(f"bad value {lines[i]!r}", i + 1) from None
        i += 1
    if any(line.strip() for line in lines[i:]):
        raise CheckpointError("trailing content after values", i + 1)
    layout = tuple(layout)
    if layout != config.layout():
        raise CheckpointError("layout does not match the stored model config")
    try:
        theta = ParamVector(values, layout)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from None
    return theta, config
