"""Experiment configuration: flat ``key=value`` files with ``#`` comments."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .drift import AdaptConfig, EwmaDetectorState
from .forecaster import ModelConfig
from .meta import MetaConfig
from .metrics import RecoveryConfig
from .radio import RadioEnvironment


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # model
    k: int = 10
    H: int = 3
    hidden_dim: int = 64
    head_layers: tuple = (64, 64)
    lambda_ho: float = 0.5
    s_pos: float = 100.0
    c_rsrp: float = -90.0
    s_rsrp: float = 20.0
    s_speed: float = 10.0
    s_out: float = 3.0
    # meta-learning
    inner_steps: int = 5
    inner_lr: float = 1e-2
    meta_step: float = 0.1
    meta_iterations: int = 1000
    task_batch: int = 5
    support_size: int = 10
    query_size: int = 20
    eval_every: int = 50
    # offline baseline
    offline_epochs: int = 20
    offline_batch: int = 32
    offline_lr: float = 1e-3
    # online adaptation
    n_adapt: int = 10
    adapt_steps: int = 5
    adapt_lr: float = 1e-3
    lambda_reg: float = 1e-4
    # drift detection
    ewma_lambda: float = 0.2
    ewma_window: int = 100
    ewma_gamma: float = 2.0
    warmup_min: int = 20
    cooldown: int = 10
    # sliding-window baseline
    sliding_n: int = 10
    sliding_steps: int = 1
    sliding_lr: float = 1e-3
    # Kalman baseline
    kf_q: float = 0.1
    kf_r: float = 1.0
    # radio
    bs_rows: int = 3
    bs_cols: int = 3
    bs_pitch: float = 400.0
    tx_power: float = 30.0
    pl0: float = 30.0
    pl_exponent: float = 3.0
    shadow_sigma: float = 4.0
    shadow_corr: float = 50.0
    n_beams: int = 16
    radio_seed: int = 0
    # synthetic mobility and tasks
    tiles_x: int = 6
    tiles_y: int = 5
    tile_extent: float = 200.0
    task_mode: str = "tiles"
    kmeans_k: int = 30
    traj_per_tile: int = 4
    traj_duration: int = 60
    speed_min: float = 1.0
    speed_max: float = 8.0
    turn_rate_max: float = 0.1
    heading_noise_min: float = 0.02
    heading_noise_max: float = 0.15
    gps_sigma_min: float = 0.5
    gps_sigma_max: float = 2.0
    stride: int = 1
    split_train: float = 0.6
    split_val: float = 0.2
    split_test: float = 0.2
    input_csv: str = ""
    # evaluation
    seed: int = 0
    seeds: int = 5
    shots: tuple = (1, 5, 10, 20)
    fewshot_query: int = 20
    drift_streams: int = 6
    drift_duration: int = 120
    drift_time: int = 60
    turn_min_deg: float = 60.0
    turn_max_deg: float = 120.0
    speed_shift_up: float = 2.0
    speed_shift_down: float = 0.5
    recovery_pre: int = 20
    recovery_rolling: int = 5
    recovery_factor: float = 1.25
    ho_threshold: float = 0.5
    ho_hysteresis: float = 3.0
    ho_ttt: int = 1
    pingpong_window: int = 3
    missed_tolerance: int = 1
    ho_streams: int = 12
    ho_duration: int = 120

    def __post_init__(self):
        for name in ("head_layers", "shots"):
            v = getattr(self, name)
            object.__setattr__(self, name, tuple(int(x) for x in v))
        if self.task_mode not in ("tiles", "kmeans"):
            raise ConfigError(f"task_mode must be 'tiles' or 'kmeans', got {self.task_mode!r}")
        if abs(self.split_train + self.split_val + self.split_test - 1.0) > 1e-9:
            raise ConfigError("split fractions must sum to 1")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.drift_time >= self.drift_duration or self.drift_time < self.k + self.recovery_pre:
            raise ConfigError("drift_time must leave room for the pre-drift window")
        if self.speed_min <= 0 or self.speed_max < self.speed_min:
            raise ConfigError("invalid speed range")
        if self.traj_duration < self.k + self.H + 1:
            raise ConfigError("traj_duration must be at least k + H + 1")
        try:
            self.model()
            self.meta()
            self.adapt()
            self.detector()
            self.recovery()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -- views -------------------------------------------------------------

    def model(self) -> ModelConfig:
        return ModelConfig(k=self.k, H=self.H, hidden_dim=self.hidden_dim,
                           head_layers=self.head_layers, lambda_ho=self.lambda_ho,
                           n_beams=self.n_beams, s_pos=self.s_pos, c_rsrp=self.c_rsrp,
                           s_rsrp=self.s_rsrp, s_speed=self.s_speed, s_out=self.s_out)

    def meta(self, seed: int | None = None) -> MetaConfig:
        return MetaConfig(inner_lr=self.inner_lr, inner_steps=self.inner_steps,
                          meta_step=self.meta_step, iterations=self.meta_iterations,
                          task_batch=self.task_batch, support_size=self.support_size,
                          query_size=self.query_size,
                          seed=self.seed if seed is None else seed, eval_every=self.eval_every)

    def adapt(self) -> AdaptConfig:
        return AdaptConfig(n_adapt=self.n_adapt, k_steps=self.adapt_steps, lr=self.adapt_lr,
                           lambda_reg=self.lambda_reg)

    def detector(self) -> EwmaDetectorState:
        return EwmaDetectorState(lam=self.ewma_lambda, gamma=self.ewma_gamma,
                                 window=self.ewma_window, warmup_min=self.warmup_min,
                                 cooldown=self.cooldown)

    def recovery(self) -> RecoveryConfig:
        return RecoveryConfig(self.recovery_pre, self.recovery_rolling, self.recovery_factor)

    def radio(self) -> RadioEnvironment:
        return RadioEnvironment.grid(self.bs_rows, self.bs_cols, self.bs_pitch,
                                     tx_power=self.tx_power, pl0=self.pl0,
                                     exponent=self.pl_exponent, shadow_sigma=self.shadow_sigma,
                                     shadow_corr=self.shadow_corr, n_beams=self.n_beams,
                                     seed=self.radio_seed)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"


_DEFAULTS = {f.name: f.default for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str, where: str):
    default = _DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: bad value {raw!r} for key {key!r}") from None


def parse_config(text: str, source: str = "<config>", base: ExperimentConfig | None = None):
    """Parse ``key=value`` lines over ``base`` (defaults); unknown keys are rejected."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw, f"{source}:{lineno}")
    base = base or ExperimentConfig()
    try:
        return replace(base, **values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path=None, **overrides) -> ExperimentConfig:
    cfg = ExperimentConfig() if path is None else parse_config(Path(path).read_text(), str(path))
    return replace(cfg, **overrides) if overrides else cfg
