"""Parametric radio environment: log-distance path loss with smooth shadowing.

Supplies the per-position RSRP, serving cell and beam sector the forecaster
consumes, handover labels, and the A3-style RSRP threshold heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RadioEnvironment:
    bs_positions: tuple
    tx_power: float = 30.0
    pl0: float = 30.0
    d0: float = 1.0
    exponent: float = 3.0
    shadow_sigma: float = 4.0
    shadow_corr: float = 50.0
    n_beams: int = 16
    min_distance: float = 1.0
    seed: int = 0
    # shadowing grid covers the BS bounding box plus this margin; clamped beyond
    shadow_margin: float = 2000.0
    _grid: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        bs = np.asarray(self.bs_positions, dtype=np.float64).reshape(-1, 2)
        if len(bs) < 2:
            raise ValueError("a radio environment needs at least 2 base stations")
        if self.exponent <= 0:
            raise ValueError("path-loss exponent must be positive")
        if self.shadow_sigma < 0 or self.shadow_corr <= 0:
            raise ValueError("invalid shadowing parameters")
        if self.n_beams < 1:
            raise ValueError("n_beams must be positive")
        object.__setattr__(self, "bs_positions", tuple(map(tuple, bs.tolist())))
        lo = bs.min(axis=0) - self.shadow_margin
        n = np.ceil((bs.max(axis=0) + self.shadow_margin - lo) / self.shadow_corr).astype(int) + 2
        rng = np.random.default_rng(self.seed)
        values = rng.standard_normal((len(bs), n[0], n[1])) * self.shadow_sigma
        object.__setattr__(self, "_grid", (lo, values))

    @classmethod
    def grid(cls, rows: int = 3, cols: int = 3, pitch: float = 400.0, **kw) -> "RadioEnvironment":
        """BSs on a rows x cols lattice, first site at (pitch/2, pitch/2)."""
        pos = [((c + 0.5) * pitch, (r + 0.5) * pitch) for r in range(rows) for c in range(cols)]
        return cls(tuple(pos), **kw)

    @property
    def bs(self) -> np.ndarray:
        return np.asarray(self.bs_positions)

    @property
    def n_cells(self) -> int:
        return len(self.bs_positions)

    def to_dict(self) -> dict:
        return {
            "bs_positions": [list(p) for p in self.bs_positions],
            "tx_power": self.tx_power, "pl0": self.pl0, "d0": self.d0,
            "exponent": self.exponent, "shadow_sigma": self.shadow_sigma,
            "shadow_corr": self.shadow_corr, "n_beams": self.n_beams,
            "min_distance": self.min_distance, "seed": self.seed,
        }

    def shadow(self, p) -> np.ndarray:
        """Shadowing (dB) of every BS at positions ``p``: shape ``(..., n_bs)``."""
        p = np.asarray(p, dtype=np.float64)
        lo, values = self._grid
        if self.shadow_sigma == 0:
            return np.zeros(p.shape[:-1] + (values.shape[0],))
        u = np.clip((p - lo) / self.shadow_corr, 0.0, np.array(values.shape[1:]) - 1.000001)
        i = np.floor(u).astype(int)
        f = u - i
        ix, iy = i[..., 0], i[..., 1]
        fx, fy = f[..., 0, None], f[..., 1, None]
        v00 = np.moveaxis(values[:, ix, iy], 0, -1)
        v10 = np.moveaxis(values[:, ix + 1, iy], 0, -1)
        v01 = np.moveaxis(values[:, ix, iy + 1], 0, -1)
        v11 = np.moveaxis(values[:, ix + 1, iy + 1], 0, -1)
        return (v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy)
                + v01 * (1 - fx) * fy + v11 * fx * fy)

    def rsrp_all(self, p) -> np.ndarray:
        """RSRP (dBm) from every BS at positions ``p`` ``(..., 2)`` -> ``(..., n_bs)``."""
        p = np.asarray(p, dtype=np.float64)
        d = np.linalg.norm(p[..., None, :] - self.bs, axis=-1)
        d = np.maximum(d, self.min_distance)
        path_loss = self.pl0 + 10.0 * self.exponent * np.log10(d / self.d0)
        return self.tx_power - path_loss - self.shadow(p)


def rsrp(env: RadioEnvironment, bs: int, p) -> float:
    return float(env.rsrp_all(np.asarray(p, dtype=np.float64))[..., bs])


def serving_cell(env: RadioEnvironment, p):
    """Index of the strongest BS at ``p`` (lowest index on ties). Vectorized over ``p``."""
    out = np.argmax(env.rsrp_all(p), axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def beam_index(env: RadioEnvironment, bs: int, p):
    """Angular sector of ``p`` seen from BS ``bs``.

    The angle ``atan2(dy, dx)`` in (-pi, pi] is mapped through ``(angle + pi) / 2pi``,
    so due west of the site is sector 0 and due east is sector ``n_beams // 2``.
    """
    p = np.asarray(p, dtype=np.float64)
    d = p - np.asarray(env.bs_positions[bs]) if np.ndim(bs) == 0 else p - env.bs[bs]
    angle = np.arctan2(d[..., 1], d[..., 0])
    u = (angle + math.pi) / (2.0 * math.pi)
    out = np.floor(env.n_beams * u).astype(int) % env.n_beams
    return int(out) if np.ndim(out) == 0 else out


def radio_features(env: RadioEnvironment, positions):
    """Serving cell, its RSRP and its beam sector for each position ``(n, 2)``."""
    positions = np.asarray(positions, dtype=np.float64)
    all_rsrp = env.rsrp_all(positions)
    cells = np.argmax(all_rsrp, axis=-1)
    best = np.take_along_axis(all_rsrp, cells[..., None], axis=-1)[..., 0]
    beams = beam_index(env, cells, positions)
    return cells, best, beams


def label_handover(cells) -> np.ndarray:
    """``h[i] = 1`` iff ``cells[i + 1] != cells[i]``; the first step has no label."""
    c = np.asarray(cells)
    return (c[1:] != c[:-1]).astype(np.int64)


def predicted_ho_from_traj(env: RadioEnvironment, pred_pos, current_cell: int):
    """Binary HO decisions implied by serving cells at predicted positions."""
    cells = serving_cell(env, np.asarray(pred_pos, dtype=np.float64).reshape(-1, 2))
    return label_handover(np.concatenate([[current_cell], np.atleast_1d(cells)]))


def ho_margin_from_traj(env: RadioEnvironment, pred_pos, current_cell: int):
    """Predicted cells and, per horizon step, the dB margin of the strongest other
    cell over the previously inferred one. The margin is positive exactly when a
    handover is inferred (up to argmax ties), negative otherwise."""
    r = env.rsrp_all(np.asarray(pred_pos, dtype=np.float64).reshape(-1, 2))
    cells = np.argmax(r, axis=-1)
    prev = np.concatenate([[current_cell], cells[:-1]])
    rows = np.arange(len(cells))
    own = r[rows, prev]
    others = r.copy()
    others[rows, prev] = -np.inf
    return cells, others.max(axis=-1) - own


@dataclass
class HeuristicTrace:
    ho: np.ndarray  # 1 where a handover is executed at that step
    serving: np.ndarray  # serving cell after the step's decision
    margin: np.ndarray  # best-neighbour RSRP minus serving RSRP (dB), before the decision


def rsrp_threshold_heuristic(env: RadioEnvironment, positions, hysteresis: float = 3.0,
                             ttt: int = 1, initial_cell: int | None = None) -> HeuristicTrace:
    """A3-style rule: hand over when a neighbour beats the serving cell by
    ``hysteresis`` dB for ``ttt`` consecutive steps."""
    if ttt < 1:
        raise ValueError("time-to-trigger must be at least one step")
    r = env.rsrp_all(np.asarray(positions, dtype=np.float64).reshape(-1, 2))
    n = len(r)
    serving = int(np.argmax(r[0])) if initial_cell is None else int(initial_cell)
    ho = np.zeros(n, dtype=np.int64)
    cells = np.empty(n, dtype=np.int64)
    margins = np.empty(n)
    count = 0
    for t in range(n):
        others = r[t].copy()
        others[serving] = -np.inf
        nbr = int(np.argmax(others))
        margins[t] = others[nbr] - r[t, serving]
        if margins[t] > hysteresis:
            count += 1
        else:
            count = 0
        if count >= ttt:
            serving = nbr
            ho[t] = 1
            count = 0
        cells[t] = serving
    return HeuristicTrace(ho, cells, margins)
