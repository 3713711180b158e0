"""Synthetic 1 Hz mobility, GPS-CSV ingestion, windowing and task construction."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from .forecaster import Sample
from .radio import RadioEnvironment, radio_features

SUDDEN_TURN = "SuddenTurn"
SPEED_SHIFT = "SpeedShift"


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    out = np.mod(-np.asarray(a, dtype=np.float64) + math.pi, 2.0 * math.pi)
    out = math.pi - out
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DriftEvent:
    kind: str
    time: int
    magnitude: float

    def __post_init__(self):
        if self.kind == SUDDEN_TURN:
            if not abs(self.magnitude) > math.pi / 4:
                raise ValueError("a sudden turn must exceed 45 degrees")
        elif self.kind == SPEED_SHIFT:
            if not (self.magnitude >= 1.5 or 0 < self.magnitude <= 0.5):
                raise ValueError("a speed shift factor must be >= 1.5 or in (0, 0.5]")
        else:
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.time < 0:
            raise ValueError("drift time must be non-negative")


@dataclass(frozen=True)
class TrajectoryConfig:
    duration: int = 120
    speed: float = 1.5
    heading_noise: float = 0.05
    gps_sigma: float = 0.0
    drift: tuple = ()
    seed: int = 0
    start: tuple = (0.0, 0.0)
    heading0: float | None = 0.0  # None draws a uniform initial heading
    turn_rate: float = 0.0  # mean heading change per second
    min_duration: int = 2

    def __post_init__(self):
        object.__setattr__(self, "drift", tuple(self.drift))
        if self.duration < self.min_duration:
            raise ValueError(f"duration {self.duration} shorter than {self.min_duration}")
        if not self.speed > 0:
            raise ValueError("speed must be positive")
        if self.heading_noise < 0 or self.gps_sigma < 0:
            raise ValueError("noise scales must be non-negative")


@dataclass
class Trajectory:
    """Positions sampled at 1 Hz.

    ``pos`` is what a GPS receiver reports; ``true_pos`` the noiseless path;
    ``speed``/``heading`` the generator's nominal kinematics.
    """

    t: np.ndarray
    pos: np.ndarray
    speed: np.ndarray
    heading: np.ndarray
    true_pos: np.ndarray | None = None
    drift: tuple = ()

    def __len__(self):
        return len(self.t)


def generate_trajectory(cfg: TrajectoryConfig) -> Trajectory:
    """Random-heading walk integrated at 1 Hz with instantaneous drift events."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.duration
    heading0 = rng.uniform(-math.pi, math.pi) if cfg.heading0 is None else cfg.heading0
    events = {}
    for ev in cfg.drift:
        events.setdefault(ev.time, []).append(ev)

    pos = np.empty((n, 2))
    speeds = np.empty(n)
    headings = np.empty(n)
    p = np.asarray(cfg.start, dtype=np.float64)
    h = float(heading0)
    v = float(cfg.speed)
    noise = rng.standard_normal(n) * cfg.heading_noise
    for i in range(n):
        for ev in events.get(i, ()):
            if ev.kind == SUDDEN_TURN:
                h += ev.magnitude
            else:
                v *= ev.magnitude
        h = wrap_angle(h)
        pos[i] = p
        speeds[i] = v
        headings[i] = h
        p = p + v * np.array([math.cos(h), math.sin(h)])
        h = h + cfg.turn_rate + noise[i]
    reported = pos + rng.standard_normal((n, 2)) * cfg.gps_sigma if cfg.gps_sigma else pos.copy()
    return Trajectory(np.arange(n), reported, speeds, headings, pos, cfg.drift)


def _median3(x: np.ndarray) -> np.ndarray:
    if len(x) < 3:
        return x.copy()
    padded = np.concatenate([[x[0]], x, [x[-1]]])
    return np.median(np.stack([padded[:-2], padded[1:-1], padded[2:]]), axis=0)


def derive_kinematics(positions, dt: float = 1.0):
    """Finite-difference speed and heading, median-filtered (window 3)."""
    p = np.asarray(positions, dtype=np.float64)
    if len(p) < 2:
        raise ValueError("need at least two positions")
    d = np.diff(p, axis=0)
    speed = np.linalg.norm(d, axis=1) / dt
    heading = np.arctan2(d[:, 1], d[:, 0])
    speed = np.concatenate([[speed[0]], speed])
    heading = np.concatenate([[heading[0]], heading])
    speed = _median3(speed)
    heading = wrap_angle(_median3(np.unwrap(heading)))
    return speed, np.atleast_1d(heading)


# ---------------------------------------------------------------------------
# GPS CSV ingestion

EARTH_RADIUS = 6_371_008.8
MAX_GAP = 5.0
MAX_SPEED = 50.0


class IngestError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class EmptyIngestWarning(UserWarning):
    pass


def _parse_time(raw: str) -> float:
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        pass
    dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    return dt.timestamp()


def ingest_geolife_csv(path, max_gap: float = MAX_GAP, max_speed: float = MAX_SPEED):
    """Read a ``time,lat,lon`` CSV into 1 Hz planar segments.

    Positions are projected equirectangularly about the trace centroid, split
    wherever consecutive fixes are more than ``max_gap`` seconds apart, linearly
    resampled to whole seconds, and segments implying speeds above ``max_speed``
    are dropped. Returns a list of :class:`Trajectory` with derived kinematics.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["time", "lat", "lon"]:
            raise IngestError(f"expected header 'time,lat,lon', got {header!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) < 3:
                raise IngestError(f"expected 3 fields, got {len(row)}", lineno)
            try:
                t = _parse_time(row[0])
                lat, lon = float(row[1]), float(row[2])
            except ValueError as exc:
                raise IngestError(f"cannot parse row {row!r}: {exc}", lineno) from None
            if not (-90 <= lat <= 90 and -180 <= lon <= 180) or not math.isfinite(t):
                raise IngestError(f"coordinates out of range: {row!r}", lineno)
            rows.append((t, lat, lon))

    segments = []
    if rows:
        arr = np.array(sorted(rows))
        # drop duplicate timestamps (keep first fix)
        keep = np.concatenate([[True], np.diff(arr[:, 0]) > 0])
        arr = arr[keep]
        lat0, lon0 = np.radians(arr[:, 1].mean()), np.radians(arr[:, 2].mean())
        x = EARTH_RADIUS * (np.radians(arr[:, 2]) - lon0) * math.cos(lat0)
        y = EARTH_RADIUS * (np.radians(arr[:, 1]) - lat0)
        t = arr[:, 0]
        breaks = np.flatnonzero(np.diff(t) > max_gap) + 1
        for idx in np.split(np.arange(len(t)), breaks):
            ts = t[idx]
            grid = np.arange(math.ceil(ts[0]), math.floor(ts[-1]) + 1, dtype=np.float64)
            if len(grid) < 2:
                continue
            px = np.interp(grid, ts, x[idx])
            py = np.interp(grid, ts, y[idx])
            pos = np.column_stack([px, py])
            step = np.linalg.norm(np.diff(pos, axis=0), axis=1)
            if np.any(step > max_speed):
                continue
            speed, heading = derive_kinematics(pos)
            segments.append(Trajectory(grid - grid[0], pos, speed, heading, None))
    if not segments:
        warnings.warn(f"{path}: no usable segments after resampling", EmptyIngestWarning,
                      stacklevel=2)
    return segments


# ---------------------------------------------------------------------------
# radio-annotated tracks and windowing

TRACK_COLUMNS = ("t", "x", "y", "speed", "heading", "rsrp", "beam", "cell")


@dataclass
class Track:
    """A trajectory with the radio features seen along it."""

    t: np.ndarray
    pos: np.ndarray
    speed: np.ndarray
    heading: np.ndarray
    rsrp: np.ndarray
    beam: np.ndarray
    cell: np.ndarray
    drift: tuple = ()
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def rows(self) -> np.ndarray:
        """Raw window rows ``(t, x, y, rsrp, beam, speed, heading)``."""
        return np.column_stack([self.t, self.pos, self.rsrp, self.beam, self.speed,
                                self.heading]).astype(np.float64)


def attach_radio(traj: Trajectory, env: RadioEnvironment, kinematics: str = "derived",
                 **meta) -> Track:
    """Annotate a trajectory with serving cell, RSRP and beam.

    Radio quantities are evaluated where the UE actually is (``true_pos`` when
    the generator provides it, else the reported positions).
    ``kinematics="derived"`` recomputes speed/heading from the reported positions
    (what a receiver would see); ``"nominal"`` keeps the generator's values.
    """
    if kinematics == "derived":
        speed, heading = derive_kinematics(traj.pos)
    elif kinematics == "nominal":
        speed, heading = traj.speed, traj.heading
    else:
        raise ValueError(f"unknown kinematics source {kinematics!r}")
    where = traj.pos if traj.true_pos is None else traj.true_pos
    cells, best, beams = radio_features(env, where)
    return Track(np.asarray(traj.t), traj.pos, speed, heading, best, beams, cells,
                 tuple(traj.drift), dict(meta))


def write_tracks_csv(tracks: Sequence[Track], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("track",) + TRACK_COLUMNS)
        for i, tr in enumerate(tracks):
            for j in range(len(tr)):
                w.writerow([i, int(tr.t[j]), repr(float(tr.pos[j, 0])), repr(float(tr.pos[j, 1])),
                            repr(float(tr.speed[j])), repr(float(tr.heading[j])),
                            repr(float(tr.rsrp[j])), int(tr.beam[j]), int(tr.cell[j])])


def make_samples(track: Track, k: int, H: int, stride: int = 1, tile_id: int = -1):
    """Overlapping windows of ``k`` rows with the next ``H`` positions and HO labels."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = len(track)
    if n < k + H:
        return []
    rows = track.rows()
    out = []
    for start in range(0, n - k - H + 1, stride):
        end = start + k
        cells = track.cell[end - 1:end + H]
        out.append(Sample(rows[start:end], track.pos[end:end + H],
                          (cells[1:] != cells[:-1]).astype(np.float64), tile_id,
                          int(track.cell[end - 1]), np.asarray(cells[1:])))
    return out


# ---------------------------------------------------------------------------
# tasks


@dataclass
class Task:
    tile_id: int
    samples: list
    center: tuple = (0.0, 0.0)
    extent: float = 0.0
    support_size: int = 10
    query_size: int = 20

    def __len__(self):
        return len(self.samples)


def tile_key(p, extent: float, origin=(0.0, 0.0)):
    p = np.asarray(p, dtype=np.float64)
    return np.floor((p - np.asarray(origin)) / extent).astype(int)


def assign_tile(window_xy: np.ndarray, extent: float, origin=(0.0, 0.0)) -> tuple:
    """Tile holding most window positions; ties go to the last observation's tile,
    then to the smallest tile key."""
    keys = [tuple(k) for k in tile_key(window_xy, extent, origin).tolist()]
    counts = {}
    for key in keys:
        counts[key] = counts.get(key, 0) + 1
    best = max(counts.values())
    tied = sorted(k for k, c in counts.items() if c == best)
    if len(tied) == 1:
        return tied[0]
    return keys[-1] if keys[-1] in tied else tied[0]


def tile_tasks(samples: Sequence[Sample], extent: float = 500.0, origin=(0.0, 0.0),
               keys: Sequence[tuple] | None = None):
    """Group samples into fixed square tiles by majority of window positions.

    Task ids follow sorted tile-key order, or the order of ``keys`` when given
    (samples landing outside ``keys`` are dropped).
    """
    if not extent > 0:
        raise ValueError("tile extent must be positive")
    groups = {}
    for s in samples:
        groups.setdefault(assign_tile(s.window[:, 1:3], extent, origin), []).append(s)
    order = sorted(groups) if keys is None else [tuple(k) for k in keys]
    tasks = []
    for tid, key in enumerate(order):
        members = groups.get(key, [])
        for s in members:
            s.tile_id = tid
        center = tuple((np.asarray(key) + 0.5) * extent + np.asarray(origin))
        tasks.append(Task(tid, members, center, extent))
    return tasks


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding. Returns ``(labels, centers)``."""
    x = np.asarray(points, dtype=np.float64)
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be between 1 and the number of points ({n})")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    labels = None
    for _ in range(max_iter):
        dist = np.sum((x[:, None, :] - centers[None]) ** 2, axis=2)
        new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return labels, centers


def kmeans_tasks(samples: Sequence[Sample], k: int, seed: int = 0):
    """Cluster samples by window-centroid position into ``k`` tasks."""
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to cluster")
    cent = np.array([s.window[:, 1:3].mean(axis=0) for s in samples])
    labels, centers = kmeans(cent, k, seed)
    tasks = [Task(j, [], tuple(centers[j])) for j in range(k)]
    for s, lab in zip(samples, labels):
        s.tile_id = int(lab)
        tasks[lab].samples.append(s)
    return tasks


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ValueError("need three non-negative fractions")
        if not math.isclose(sum(self.fractions), 1.0, abs_tol=1e-9):
            raise ValueError("split fractions must sum to 1")


def split_tasks(tasks: Sequence[Task], spec: SplitSpec = SplitSpec()):
    """Seeded shuffle of tasks into disjoint train/val/test lists."""
    tasks = list(tasks)
    n = len(tasks)
    order = np.random.default_rng(spec.seed).permutation(n)
    n_train = int(round(spec.fractions[0] * n))
    n_val = min(int(round(spec.fractions[1] * n)), n - n_train)
    pick = [tasks[i] for i in order]
    return pick[:n_train], pick[n_train:n_train + n_val], pick[n_train + n_val:]
