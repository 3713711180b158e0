"""Synthetic city benchmark: per-tile mobility profiles, radio annotation,
tasks, splits, and drift / handover evaluation streams."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import ConfigError, ExperimentConfig
from .mobility import (
    SPEED_SHIFT, SUDDEN_TURN, DriftEvent, SplitSpec, Track, TrajectoryConfig, attach_radio,
    generate_trajectory, ingest_geolife_csv, kmeans_tasks, make_samples, split_tasks, tile_tasks,
)
from .radio import RadioEnvironment


@dataclass(frozen=True)
class TileProfile:
    speed: float
    turn_rate: float
    heading_noise: float
    gps_sigma: float


DEFAULT_PROFILE = TileProfile(speed=3.0, turn_rate=0.0, heading_noise=0.08, gps_sigma=1.0)


def tile_profiles(cfg: ExperimentConfig, seed: int) -> list[TileProfile]:
    """One mobility profile per grid tile (row-major), log-uniform speeds."""
    rng = np.random.default_rng([seed, 1])
    n = cfg.tiles_x * cfg.tiles_y
    speed = np.exp(rng.uniform(math.log(cfg.speed_min), math.log(cfg.speed_max), n))
    turn = rng.uniform(-cfg.turn_rate_max, cfg.turn_rate_max, n)
    hn = rng.uniform(cfg.heading_noise_min, cfg.heading_noise_max, n)
    gps = rng.uniform(cfg.gps_sigma_min, cfg.gps_sigma_max, n)
    return [TileProfile(*map(float, v)) for v in zip(speed, turn, hn, gps)]


def grid_keys(cfg: ExperimentConfig) -> list[tuple[int, int]]:
    return [(ix, iy) for iy in range(cfg.tiles_y) for ix in range(cfg.tiles_x)]


@dataclass
class Dataset:
    tracks: list
    tasks: list
    train: list
    val: list
    test: list
    profiles: list = field(default_factory=list)
    source: str = "synthetic"

    def manifest(self, cfg: ExperimentConfig, seed: int) -> dict:
        return {
            "tool": "driftcast",
            "config_hash": cfg.hash(),
            "seed": seed,
            "source": self.source,
            "n_tracks": len(self.tracks),
            "n_steps": int(sum(len(t) for t in self.tracks)),
            "n_tasks": len(self.tasks),
            "n_samples": int(sum(len(t) for t in self.tasks)),
            "split": {
                "train": [t.tile_id for t in self.train],
                "val": [t.tile_id for t in self.val],
                "test": [t.tile_id for t in self.test],
            },
            "task_sizes": {str(t.tile_id): len(t) for t in self.tasks},
            "profiles": [asdict(p) for p in self.profiles],
        }

    def profile_of(self, task) -> TileProfile:
        if self.profiles and 0 <= task.tile_id < len(self.profiles):
            return self.profiles[task.tile_id]
        return DEFAULT_PROFILE


def _traj_config(profile: TileProfile, start, duration: int, seed, drift=()) -> TrajectoryConfig:
    return TrajectoryConfig(duration=duration, speed=profile.speed,
                            heading_noise=profile.heading_noise, gps_sigma=profile.gps_sigma,
                            drift=tuple(drift), seed=seed, start=tuple(start), heading0=None,
                            turn_rate=profile.turn_rate)


def synthetic_tracks(cfg: ExperimentConfig, env: RadioEnvironment, seed: int,
                     profiles: list[TileProfile]) -> list[Track]:
    rng = np.random.default_rng([seed, 2])
    tracks = []
    for tid, (ix, iy) in enumerate(grid_keys(cfg)):
        lo = np.array([ix, iy], dtype=np.float64) * cfg.tile_extent
        for j in range(cfg.traj_per_tile):
            start = lo + rng.uniform(0.25, 0.75, 2) * cfg.tile_extent
            tc = _traj_config(profiles[tid], start, cfg.traj_duration,
                              [seed, 3, tid, j])
            tracks.append(attach_radio(generate_trajectory(tc), env, tile=tid))
    return tracks


def build_dataset(cfg: ExperimentConfig, seed: int | None = None) -> Dataset:
    """Generate (or ingest) tracks, window them, group into tasks and split."""
    seed = cfg.seed if seed is None else seed
    env = cfg.radio()
    if cfg.input_csv:
        profiles = []
        tracks = [attach_radio(tr, env) for tr in ingest_geolife_csv(cfg.input_csv)]
        source = cfg.input_csv
    else:
        profiles = tile_profiles(cfg, seed)
        tracks = synthetic_tracks(cfg, env, seed, profiles)
        source = "synthetic"
    if not tracks:
        raise ConfigError("no trajectories to build a dataset from")
    samples = [s for tr in tracks for s in make_samples(tr, cfg.k, cfg.H, cfg.stride)]
    if not samples:
        raise ConfigError("trajectories too short for any k+H window")
    if cfg.task_mode == "kmeans":
        tasks = kmeans_tasks(samples, min(cfg.kmeans_k, len(samples)), seed)
    elif cfg.input_csv:
        tasks = tile_tasks(samples, cfg.tile_extent)
    else:
        tasks = tile_tasks(samples, cfg.tile_extent, keys=grid_keys(cfg))
    tasks = [t for t in tasks if len(t)]
    train, val, test = split_tasks(
        tasks, SplitSpec((cfg.split_train, cfg.split_val, cfg.split_test), seed))
    return Dataset(tracks, tasks, train, val, test, profiles, source)


def _stream_start(dataset: Dataset, task, rng) -> np.ndarray:
    if task.extent:
        return np.asarray(task.center) + rng.uniform(-0.25, 0.25, 2) * task.extent
    return np.asarray(task.center, dtype=np.float64)


def drift_streams(cfg: ExperimentConfig, dataset: Dataset, kind: str, seed: int) -> list[Track]:
    """Evaluation streams on unseen tasks with one drift event at ``cfg.drift_time``."""
    if kind not in (SUDDEN_TURN, SPEED_SHIFT):
        raise ValueError(f"unknown drift scenario {kind!r}")
    env = cfg.radio()
    rng = np.random.default_rng([seed, 4, 0 if kind == SUDDEN_TURN else 1])
    pool = dataset.test or dataset.tasks
    out = []
    for i in range(cfg.drift_streams):
        task = pool[i % len(pool)]
        if kind == SUDDEN_TURN:
            mag = math.radians(rng.uniform(cfg.turn_min_deg, cfg.turn_max_deg))
            mag *= 1 if rng.random() < 0.5 else -1
        else:
            mag = cfg.speed_shift_up if rng.random() < 0.5 else cfg.speed_shift_down
        event = DriftEvent(kind, cfg.drift_time, mag)
        tc = _traj_config(dataset.profile_of(task), _stream_start(dataset, task, rng),
                          cfg.drift_duration, [seed, 5, i, 0 if kind == SUDDEN_TURN else 1],
                          drift=(event,))
        out.append(attach_radio(generate_trajectory(tc), env, tile=task.tile_id,
                                drift_time=cfg.drift_time, drift_kind=kind, magnitude=mag))
    return out


def ho_streams(cfg: ExperimentConfig, dataset: Dataset, seed: int) -> list[Track]:
    """Drift-free evaluation streams on unseen tasks for handover metrics."""
    env = cfg.radio()
    rng = np.random.default_rng([seed, 6])
    pool = dataset.test or dataset.tasks
    out = []
    for i in range(cfg.ho_streams):
        task = pool[i % len(pool)]
        tc = _traj_config(dataset.profile_of(task), _stream_start(dataset, task, rng),
                          cfg.ho_duration, [seed, 7, i])
        out.append(attach_radio(generate_trajectory(tc), env, tile=task.tile_id))
    return out
