"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np

from .forecaster import N_RAW, Sample, SampleBatch
from .mobility import Task, Track


def check_samples(X, name: str = "X") -> list[Sample]:
    """Accept a Sample, a sequence of Samples or a (n, k, 7) window array."""
    if isinstance(X, Sample):
        return [X]
    if isinstance(X, SampleBatch):
        return [Sample(w, p, h) for w, p, h in zip(X.windows, X.target_pos, X.target_ho)]
    if isinstance(X, np.ndarray):
        if X.ndim != 3 or X.shape[2] != N_RAW:
            raise ValueError(f"{name} array must have shape (n, k, {N_RAW}), got {X.shape}")
        return [Sample(w, np.zeros((1, 2)), np.zeros(1)) for w in X]
    out = list(X)
    if not out:
        raise ValueError(f"{name} is empty")
    for s in out:
        if not isinstance(s, Sample):
            raise TypeError(f"{name} must contain Sample objects, got {type(s).__name__}")
    return out


def check_horizon(samples: list[Sample], H: int, name: str = "X") -> None:
    bad = [s.H for s in samples if s.H != H]
    if bad:
        raise ValueError(f"{name}: targets cover {bad[0]} steps, model horizon is {H}")


def check_window(samples: list[Sample], k: int, name: str = "X") -> None:
    bad = [s.k for s in samples if s.k != k]
    if bad:
        raise ValueError(f"{name}: windows have {bad[0]} rows, model expects {k}")


def check_tasks(tasks, name: str = "tasks") -> list[Task]:
    out = list(tasks)
    if not out:
        raise ValueError(f"{name} is empty")
    for t in out:
        if not isinstance(t, Task):
            raise TypeError(f"{name} must contain Task objects, got {type(t).__name__}")
    return out


def check_stream(stream, name: str = "stream"):
    if isinstance(stream, Track):
        return stream
    return check_samples(stream, name)


def check_residuals(r, name: str = "residuals") -> np.ndarray:
    arr = np.asarray(r, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if np.any(arr < 0):
        raise ValueError(f"{name} must be non-negative distances")
    return arr
