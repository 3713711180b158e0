"""Trajectory, handover and adaptation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata


def _dist(pred, true) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if pred.shape != true.shape or pred.shape[-1] != 2:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs true {true.shape}")
    return np.linalg.norm(pred - true, axis=-1)


def ade(pred, true):
    """Average displacement error over the horizon (per sample for batches)."""
    d = _dist(pred, true).mean(axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def fde(pred, true):
    """Displacement error at the final horizon step."""
    d = _dist(pred, true)[..., -1]
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    precision_undefined: bool = False
    recall_undefined: bool = False


def classification_metrics(labels, probs, threshold: float = 0.5) -> ClassificationReport:
    """Confusion-matrix metrics with positives predicted at ``prob >= threshold``.

    Empty precision/recall denominators give 0 and set the matching flag.
    """
    y = np.asarray(labels).astype(bool).ravel()
    p = np.asarray(probs, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise ValueError("labels and probabilities differ in length")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    yhat = p >= threshold
    tp = int(np.sum(yhat & y))
    fp = int(np.sum(yhat & ~y))
    fn = int(np.sum(~yhat & y))
    tn = int(np.sum(~yhat & ~y))
    n = tp + fp + fn + tn
    prec_undef = tp + fp == 0
    rec_undef = tp + fn == 0
    precision = 0.0 if prec_undef else tp / (tp + fp)
    recall = 0.0 if rec_undef else tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ClassificationReport((tp + tn) / n if n else 0.0, precision, recall, f1,
                                tp, fp, fn, tn, prec_undef, rec_undef)


def auroc(labels, scores) -> float:
    """Mann-Whitney AUROC with average ranks for ties; nan if a class is absent."""
    y = np.asarray(labels).astype(bool).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = rankdata(s)  # average ranks on ties
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


class RateResult(NamedTuple):
    rate: float
    count: int
    total: int

    @property
    def undefined(self) -> bool:
        return self.total == 0


def handover_steps(cells) -> np.ndarray:
    """Indices ``i`` where ``cells[i] != cells[i - 1]``."""
    c = np.asarray(cells)
    return np.flatnonzero(c[1:] != c[:-1]) + 1


def ping_pong_rate(cells, window: int = 3) -> RateResult:
    """Fraction of handovers A->B whose next handover returns B->A within ``window`` steps."""
    c = np.asarray(cells)
    steps = handover_steps(c)
    count = 0
    for a, b in zip(steps, steps[1:]):
        if b - a <= window and c[b] == c[a - 1] and c[b - 1] == c[a]:
            count += 1
    total = len(steps)
    return RateResult(count / total if total else 0.0, count, total)


def missed_ho_rate(true_steps, pred_steps, tolerance: int = 1) -> RateResult:
    """Share of true handovers with no predicted handover within ``tolerance`` steps.

    Matching is greedy and one-to-one: true events in time order each take the
    nearest still-unmatched prediction (earlier one on distance ties).
    """
    true_steps = sorted(int(s) for s in true_steps)
    free = sorted(int(s) for s in pred_steps)
    missed = 0
    for t in true_steps:
        best = None
        for j, p in enumerate(free):
            d = abs(p - t)
            if d <= tolerance and (best is None or d < abs(free[best] - t)):
                best = j
        if best is None:
            missed += 1
        else:
            free.pop(best)
    total = len(true_steps)
    return RateResult(missed / total if total else 0.0, missed, total)


@dataclass(frozen=True)
class RecoveryConfig:
    pre_window: int = 20
    rolling: int = 5
    factor: float = 1.25

    def __post_init__(self):
        if self.pre_window < 1 or self.rolling < 1 or not self.factor > 0:
            raise ValueError("invalid recovery config")


NOT_RECOVERED = None


def rolling_mean(x, window: int) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` entries average what is available."""
    x = np.asarray(x, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def first_recovery(rolling, drift_index: int, baseline: float, factor: float = 1.25):
    """Steps from ``drift_index`` until the rolling value, having left the band
    ``<= factor * baseline``, first returns to it. A trace that never leaves the
    band recovers at step 0."""
    post = np.asarray(rolling, dtype=np.float64)[drift_index:]
    limit = factor * baseline
    out = np.flatnonzero(post > limit)
    if not len(out):
        return 0
    back = np.flatnonzero(post[out[0]:] <= limit)
    return int(out[0] + back[0]) if len(back) else NOT_RECOVERED


def recovery_time(ade_trace, drift_index: int, cfg: RecoveryConfig = RecoveryConfig()):
    """Steps after ``drift_index`` until the trailing rolling ADE returns within
    ``cfg.factor`` of its pre-drift mean; ``NOT_RECOVERED`` (None) otherwise."""
    if drift_index < 1 or drift_index >= len(ade_trace):
        raise ValueError("drift index must fall inside the trace after step 0")
    roll = rolling_mean(ade_trace, cfg.rolling)
    baseline = float(roll[max(0, drift_index - cfg.pre_window):drift_index].mean())
    return first_recovery(roll, drift_index, baseline, cfg.factor)


class Aggregate(NamedTuple):
    mean: float
    std: float
    n: int

    @property
    def single(self) -> bool:
        return self.n < 2


def aggregate_seeds(reports: Sequence[Mapping[str, float]]) -> dict:
    """Mean and population std of every metric across per-seed reports."""
    if not reports:
        raise ValueError("no reports to aggregate")
    keys = list(reports[0])
    out = {}
    for key in keys:
        vals = np.array([r[key] for r in reports], dtype=np.float64)
        out[key] = Aggregate(float(vals.mean()), float(vals.std()), len(vals))
    return out
