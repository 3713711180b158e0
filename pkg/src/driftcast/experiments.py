"""Experiment drivers behind the command line: dataset bundles, meta-training,
the four evaluation protocols and report assembly.

Every ``cmd_*`` function returns a report dict and, given ``out``, writes
``report.json`` there. Reports contain only quantities determined by
(config, seeds, checkpoint), so reruns produce identical bytes; wall-clock
measurements go to a separate ``timings.json``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import cv_predict, kf_forecast, train_offline
from .benchmark import Dataset, build_dataset, drift_streams, ho_streams
from .config import ConfigError, ExperimentConfig, parse_config
from .drift import compact_adapt, run_stream, write_trace_csv
from .forecaster import load_checkpoint, predict, save_checkpoint, stack_samples
from .meta import inner_adapt, meta_train
from .metrics import (
    aggregate_seeds, auroc, classification_metrics, handover_steps, missed_ho_rate,
    ping_pong_rate, recovery_time,
)
from .mobility import SPEED_SHIFT, SUDDEN_TURN, make_samples, write_tracks_csv
from .nn import ParamVector
from .radio import ho_margin_from_traj, rsrp_threshold_heuristic

logger = logging.getLogger(__name__)

TOOL = "driftcast"
ZEROSHOT_METHODS = ("cv", "kf", "offline", "fomaml", "reptile")
LEARNED = ("offline", "fomaml", "reptile")
DRIFT_METHODS = ("ours", "offline", "sliding")
HO_METHODS = ("heuristic", "ho_head", "trajectory")
DRIFT_OFFSETS = (0, 5, 10, 20)


def seed_list(cfg: ExperimentConfig, seed: int | None = None, n: int | None = None) -> list[int]:
    first = cfg.seed if seed is None else seed
    return [first + i for i in range(cfg.seeds if n is None else n)]


def analytic_param_count(cfg: ExperimentConfig) -> int:
    """Closed-form size of the GRU plus the two MLP heads."""
    F, h = 7, cfg.hidden_dim
    total = 3 * (F * h + h * h + h)
    for out in (2 * cfg.H, cfg.H):
        dims = (h,) + tuple(cfg.head_layers) + (out,)
        total += sum(a * b + b for a, b in zip(dims, dims[1:]))
    return total


# ---------------------------------------------------------------------------
# per-seed state, memoized within a process


@dataclass
class SeedState:
    cfg: ExperimentConfig
    seed: int
    dataset: Dataset
    models: dict = field(default_factory=dict)
    histories: dict = field(default_factory=dict)


_CACHE: dict = {}


def clear_cache() -> None:
    _CACHE.clear()


def seed_state(cfg: ExperimentConfig, seed: int) -> SeedState:
    key = (cfg.hash(), seed)
    if key not in _CACHE:
        _CACHE[key] = SeedState(cfg, seed, build_dataset(cfg, seed))
    return _CACHE[key]


def train_model(state: SeedState, method: str) -> ParamVector:
    """Train (once per process) the learned method ``method`` for this seed."""
    if method in state.models:
        return state.models[method]
    cfg, ds, seed = state.cfg, state.dataset, state.seed
    mc = cfg.model()
    theta0 = mc.init(seed)
    if method in ("reptile", "fomaml"):
        theta, hist = meta_train(theta0, mc, ds.train, cfg.meta(seed), method=method,
                                 val_tasks=ds.val or None)
    elif method == "offline":
        pooled = [s for task in ds.train for s in task.samples]
        theta, hist = train_offline(theta0, mc, pooled, cfg.offline_epochs, cfg.offline_batch,
                                    cfg.offline_lr, seed)
        hist = list(enumerate(hist, start=1))
    else:
        raise ValueError(f"unknown learned method {method!r}")
    state.models[method] = theta
    state.histories[method] = hist
    return theta


def install_checkpoint(state: SeedState, path, method: str = "reptile") -> None:
    theta, mc = load_checkpoint(path)
    if mc != state.cfg.model():
        raise ConfigError(f"checkpoint {path} was trained with a different model config")
    state.models[method] = theta


# ---------------------------------------------------------------------------
# evaluation protocols (single seed)


def _test_samples(ds: Dataset) -> list:
    return [s for task in (ds.test or ds.tasks) for s in task.samples]


def _ade_fde(pred, true) -> tuple[float, float]:
    d = np.linalg.norm(np.asarray(pred) - np.asarray(true), axis=-1)
    return float(d.mean()), float(d[..., -1].mean())


def zeroshot_metrics(state: SeedState, methods=ZEROSHOT_METHODS) -> dict:
    cfg = state.cfg
    mc = cfg.model()
    samples = _test_samples(state.dataset)
    batch = stack_samples(samples)
    out = {}
    for m in methods:
        if m == "cv":
            pred = np.stack([cv_predict(s, cfg.H) for s in samples])
        elif m == "kf":
            pred = np.stack([kf_forecast(s, cfg.H, cfg.kf_q, cfg.kf_r) for s in samples])
        elif m in LEARNED:
            pred = predict(train_model(state, m), mc, batch).pred_pos
        else:
            raise ValueError(f"unknown zero-shot method {m!r}")
        out[f"{m}.ade"], out[f"{m}.fde"] = _ade_fde(pred, batch.target_pos)
    return out


def fewshot_split(task, shots, n_query: int, seed: int):
    """Fixed per-task split: a support pool (prefix used for each shot count)
    and a disjoint query set shared by every shot count. Small tasks get a
    shorter query set (whatever the largest support pool leaves over)."""
    n_pool = max(shots)
    if len(task.samples) <= n_pool:
        raise ValueError(f"task {task.tile_id} has {len(task.samples)} samples, "
                         f"needs more than {n_pool}")
    need = min(n_pool + n_query, len(task.samples))
    idx = np.random.default_rng([seed, 8, task.tile_id]).permutation(len(task.samples))
    pool = [task.samples[i] for i in idx[:n_pool]]
    query = [task.samples[i] for i in idx[n_pool:need]]
    return pool, query


def fewshot_metrics(state: SeedState, methods=("reptile", "offline"), shots=None) -> dict:
    cfg = state.cfg
    mc = cfg.model()
    shots = tuple(cfg.shots if shots is None else shots)
    counts = (0,) + tuple(n for n in shots if n > 0)
    tasks = state.dataset.test or state.dataset.tasks
    sums = {(m, n): [] for m in methods for n in counts}
    for task in tasks:
        pool, query = fewshot_split(task, counts, cfg.fewshot_query, state.seed)
        qb = stack_samples(query)
        for m in methods:
            theta = train_model(state, m)
            for n in counts:
                adapted = (theta if n == 0 else
                           inner_adapt(theta, mc, pool[:n], cfg.inner_lr, cfg.inner_steps))
                sums[(m, n)].append(_ade_fde(predict(adapted, mc, qb).pred_pos, qb.target_pos)[0])
    return {f"{m}.ade@{n}": float(np.mean(v)) for (m, n), v in sums.items()}


def drift_index(samples, drift_time: int, H: int) -> int:
    """First sample whose forecast targets reach past the drift event."""
    for i, s in enumerate(samples):
        if s.t + H > drift_time:
            return i
    raise ValueError("drift event falls after the last sample")


def _stream_traces(state: SeedState, track):
    cfg = state.cfg
    mc = cfg.model()
    offline = train_model(state, "offline")
    adapt = cfg.adapt()
    sliding = type(adapt)(n_adapt=cfg.sliding_n, k_steps=cfg.sliding_steps, lr=cfg.sliding_lr,
                          lambda_reg=0.0)
    return {
        "ours": run_stream(train_model(state, "reptile"), mc, track, adapt, cfg.detector(), "ewma"),
        "offline": run_stream(offline, mc, track, adapt, cfg.detector(), "never"),
        "sliding": run_stream(offline, mc, track, sliding, cfg.detector(), "always"),
    }


def drift_metrics(state: SeedState, scenario: str, trace_dir: Path | None = None):
    """Per-method recovery and ADE at fixed offsets after the drift, averaged
    over the scenario's streams. ``not recovered`` is censored at the number of
    post-drift steps and counted separately."""
    cfg = state.cfg
    rec = cfg.recovery()
    streams = drift_streams(cfg, state.dataset, scenario, state.seed)
    per = {m: {"recovery": [], "unrecovered": 0, "pre": [], "adaptations": [],
               **{f"ade@{o}": [] for o in DRIFT_OFFSETS}} for m in DRIFT_METHODS}
    events = []
    for si, track in enumerate(streams):
        traces = _stream_traces(state, track)
        samples = make_samples(track, cfg.k, cfg.H)
        d = drift_index(samples, int(track.meta["drift_time"]), cfg.H)
        for m, tr in traces.items():
            r = recovery_time(tr.ade, d, rec)
            if r is None:
                per[m]["unrecovered"] += 1
                r = len(tr.ade) - d
            per[m]["recovery"].append(r)
            per[m]["pre"].append(float(tr.ade[max(0, d - rec.pre_window):d].mean()))
            for o in DRIFT_OFFSETS:
                per[m][f"ade@{o}"].append(float(tr.ade[min(d + o, len(tr.ade) - 1)]))
            per[m]["adaptations"].append(tr.n_adaptations)
            events += [{"stream": si, "method": m, **e} for e in tr.events
                       if e.get("triggered") or m == "ours"]
            if trace_dir is not None:
                write_trace_csv(tr, trace_dir / f"{scenario}_seed{state.seed}_s{si}_{m}.csv")
    out = {}
    for m, vals in per.items():
        for key, v in vals.items():
            out[f"{m}.{key}"] = float(v) if key == "unrecovered" else float(np.mean(v))
    return out, events


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def ho_stream_outcomes(state: SeedState, track) -> dict:
    """Per-method (labels, scores, decisions) over every (sample, horizon step)
    plus each method's decided serving-cell sequence along the stream."""
    cfg = state.cfg
    mc = cfg.model()
    env = cfg.radio()
    samples = make_samples(track, cfg.k, cfg.H)
    batch = stack_samples(samples)
    out = predict(train_model(state, "reptile"), mc, batch)
    labels = batch.target_ho.astype(np.int64)
    t0 = int(samples[0].t)
    steps = np.array([s.t for s in samples]) - int(track.t[0])

    heur = rsrp_threshold_heuristic(env, track.pos, cfg.ho_hysteresis, cfg.ho_ttt,
                                    initial_cell=int(track.cell[0]))
    idx = steps[:, None] + np.arange(1, cfg.H + 1)[None, :]
    res = {"truth": {"cells": np.concatenate([[samples[0].cell],
                                              [s.target_cells[0] for s in samples]])}}
    res["heuristic"] = {"score": _sigmoid(heur.margin[idx] - cfg.ho_hysteresis),
                        "decision": heur.ho[idx],
                        "cells": heur.serving[np.concatenate([[steps[0]], steps + 1])]}

    head_prob = _sigmoid(out.ho_logits)
    res["ho_head"] = {"score": head_prob, "decision": (head_prob >= cfg.ho_threshold).astype(int)}
    serving = int(samples[0].cell)
    cells = [serving]
    rsrp_obs = env.rsrp_all(batch.windows[:, -1, 1:3])
    for i in range(len(samples)):
        if head_prob[i, 0] >= cfg.ho_threshold:
            r = rsrp_obs[i].copy()
            r[serving] = -np.inf
            serving = int(np.argmax(r))
        cells.append(serving)
    res["ho_head"]["cells"] = np.array(cells)

    traj_cells, margins = [], []
    for i, s in enumerate(samples):
        c, mg = ho_margin_from_traj(env, out.pred_pos[i], s.cell)
        traj_cells.append(c)
        margins.append(mg)
    margins = np.array(margins)
    # executed handovers: switch once every horizon step agrees on the same new
    # cell; the raw one-step sequence is kept for comparison
    serving = int(samples[0].cell)
    cells = [serving]
    for c in traj_cells:
        if c[0] != serving and np.all(c == c[0]):
            serving = int(c[0])
        cells.append(serving)
    res["trajectory"] = {"score": _sigmoid(margins), "decision": (margins > 0).astype(int),
                         "cells": np.array(cells),
                         "cells_tau1": np.concatenate([[samples[0].cell],
                                                       [c[0] for c in traj_cells]])}
    res["labels"] = labels
    res["t0"] = t0
    return res


def ho_metrics(state: SeedState) -> dict:
    cfg = state.cfg
    streams = ho_streams(cfg, state.dataset, state.seed)
    outcomes = [ho_stream_outcomes(state, tr) for tr in streams]
    labels = np.concatenate([o["labels"].ravel() for o in outcomes])
    true_steps = [handover_steps(o["truth"]["cells"]) for o in outcomes]
    out = {"truth.ho_rate": float(labels.mean())}
    for m in HO_METHODS:
        scores = np.concatenate([o[m]["score"].ravel() for o in outcomes])
        dec = np.concatenate([o[m]["decision"].ravel() for o in outcomes])
        rep = classification_metrics(labels, dec.astype(np.float64), 0.5)
        pp_n = pp_tot = miss_n = miss_tot = 0
        for o, ts in zip(outcomes, true_steps):
            pp = ping_pong_rate(o[m]["cells"], cfg.pingpong_window)
            mh = missed_ho_rate(ts, handover_steps(o[m]["cells"]), cfg.missed_tolerance)
            pp_n, pp_tot = pp_n + pp.count, pp_tot + pp.total
            miss_n, miss_tot = miss_n + mh.count, miss_tot + mh.total
        if m == "trajectory":
            n = tot = 0
            for o in outcomes:
                pp = ping_pong_rate(o[m]["cells_tau1"], cfg.pingpong_window)
                n, tot = n + pp.count, tot + pp.total
            out[f"{m}.pingpong_tau1"] = n / tot if tot else 0.0
        out.update({
            f"{m}.accuracy": rep.accuracy, f"{m}.precision": rep.precision,
            f"{m}.recall": rep.recall, f"{m}.f1": rep.f1, f"{m}.auroc": auroc(labels, scores),
            f"{m}.pingpong": pp_n / pp_tot if pp_tot else 0.0,
            f"{m}.missed": miss_n / miss_tot if miss_tot else 0.0,
            f"{m}.n_ho": float(pp_tot),
        })
    return out


def measure_efficiency(cfg: ExperimentConfig, seed: int = 0, repeats: int = 200) -> dict:
    """Wall-clock latency of one forecast and one compact update (medians, ms)."""
    mc = cfg.model()
    theta = mc.init(seed)
    rng = np.random.default_rng(seed)
    from .forecaster import Sample
    n = cfg.k + cfg.H + cfg.n_adapt
    pos = np.cumsum(rng.normal(size=(n, 2)), axis=0)
    rows = np.column_stack([np.arange(n), pos, np.full(n, -80.0), np.zeros(n),
                            np.ones(n), np.zeros(n)])
    samples = [Sample(rows[i:i + cfg.k], pos[i + cfg.k:i + cfg.k + cfg.H], np.zeros(cfg.H))
               for i in range(cfg.n_adapt)]
    lat = []
    for _ in range(repeats):
        t = time.perf_counter()
        predict(theta, mc, samples[0])
        lat.append(time.perf_counter() - t)
    ad = []
    for _ in range(max(5, repeats // 20)):
        t = time.perf_counter()
        compact_adapt(theta, theta, mc, samples, cfg.adapt())
        ad.append(time.perf_counter() - t)
    return {"inference_ms": 1e3 * float(np.median(lat)),
            "compact_adapt_ms": 1e3 * float(np.median(ad))}


# ---------------------------------------------------------------------------
# reports


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def make_report(command: str, cfg: ExperimentConfig, per_seed: dict, events=(),
                extra: dict | None = None) -> dict:
    seeds = sorted(per_seed)
    agg = aggregate_seeds([per_seed[s] for s in seeds]) if seeds else {}
    report = {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "seeds": seeds,
        "param_count": cfg.model().n_params(),
        "param_count_formula": analytic_param_count(cfg),
        "per_seed": {str(s): per_seed[s] for s in seeds},
        "aggregate": {k: {"mean": a.mean, "std": a.std, "n": a.n} for k, a in agg.items()},
        "events": list(events),
    }
    report.update(extra or {})
    return report


def _write(out, report: dict, timings: dict | None = None) -> None:
    if out is None:
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps_report(report))
    if timings is not None:
        (out / "timings.json").write_text(json.dumps(_clean(timings), sort_keys=True, indent=2)
                                          + "\n")


class _Timer:
    def __init__(self):
        self.t = {}

    def run(self, key, fn, *a, **kw):
        start = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.t[key] = self.t.get(key, 0.0) + time.perf_counter() - start


def _prepare(cfg, seeds, checkpoint=None, data=None):
    states = []
    for s in seeds:
        st = seed_state(cfg, s)
        if data is not None:
            verify_bundle(data, cfg, st)
        if checkpoint is not None:
            install_checkpoint(st, checkpoint)
        states.append(st)
    return states


# ---------------------------------------------------------------------------
# commands


def cmd_build_data(cfg: ExperimentConfig, seeds, out=None) -> dict:
    """Build one dataset per seed; write manifests, track CSVs and the config."""
    per_seed, manifests = {}, {}
    for s in seeds:
        st = seed_state(cfg, s)
        ds = st.dataset
        manifests[str(s)] = ds.manifest(cfg, s)
        per_seed[s] = {"n_tracks": float(len(ds.tracks)), "n_tasks": float(len(ds.tasks)),
                       "n_train": float(len(ds.train)), "n_val": float(len(ds.val)),
                       "n_test": float(len(ds.test))}
        if out is not None:
            Path(out).mkdir(parents=True, exist_ok=True)
            write_tracks_csv(ds.tracks, Path(out) / f"tracks_seed{s}.csv")
    report = make_report("build-data", cfg, per_seed)
    if out is not None:
        out = Path(out)
        (out / "manifest.json").write_text(dumps_report(
            {"tool": TOOL, "version": __version__, "config_hash": cfg.hash(),
             "seeds": list(seeds), "datasets": manifests}))
        (out / "config.txt").write_text(cfg.dumps())
        _write(out, report)
    return report


def load_bundle_config(path) -> ExperimentConfig:
    path = Path(path)
    cfg_file = path / "config.txt"
    if not cfg_file.exists():
        raise ConfigError(f"{path}: not a dataset bundle (config.txt missing)")
    return parse_config(cfg_file.read_text(), str(cfg_file))


def verify_bundle(path, cfg: ExperimentConfig, state: SeedState) -> None:
    """Check that a rebuilt dataset matches the manifest written by build-data."""
    manifest = json.loads((Path(path) / "manifest.json").read_text())
    if manifest["config_hash"] != cfg.hash():
        raise ConfigError(f"{path}: bundle config hash {manifest['config_hash']} does not "
                          f"match {cfg.hash()}")
    stored = manifest["datasets"].get(str(state.seed))
    if stored is None:
        raise ConfigError(f"{path}: bundle has no dataset for seed {state.seed}")
    if _clean(state.dataset.manifest(cfg, state.seed)) != stored:
        raise ConfigError(f"{path}: rebuilt dataset for seed {state.seed} differs from manifest")


def cmd_meta_train(cfg: ExperimentConfig, seeds, out=None, methods=("reptile",),
                   data=None) -> dict:
    """Meta-train per seed; write checkpoints and query-loss histories."""
    timer = _Timer()
    per_seed = {}
    for st in _prepare(cfg, seeds, data=data):
        row = {}
        for m in methods:
            theta = timer.run(f"{m}_train_s", train_model, st, m)
            hist = st.histories[m]
            row[f"{m}.final_query_loss"] = float(hist[-1][1]) if hist else float("nan")
            if out is not None:
                Path(out).mkdir(parents=True, exist_ok=True)
                save_checkpoint(theta, cfg.model(), Path(out) / f"{m}_seed{st.seed}.ckpt")
                with open(Path(out) / f"{m}_history_seed{st.seed}.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(("iteration", "loss"))
                    w.writerows((i, repr(float(v))) for i, v in hist)
        per_seed[st.seed] = row
    timings = dict(timer.t, **measure_efficiency(cfg, seeds[0]))
    report = make_report("meta-train", cfg, per_seed)
    _write(out, report, timings)
    return report


def cmd_eval_zeroshot(cfg: ExperimentConfig, seeds, out=None, methods=ZEROSHOT_METHODS,
                      checkpoint=None, data=None) -> dict:
    timer = _Timer()
    per_seed = {st.seed: timer.run("eval_s", zeroshot_metrics, st, methods)
                for st in _prepare(cfg, seeds, checkpoint, data)}
    report = make_report("eval-zeroshot", cfg, per_seed, extra={"methods": list(methods)})
    _write(out, report, timer.t)
    return report


def cmd_eval_fewshot(cfg: ExperimentConfig, seeds, out=None, shots=None,
                     methods=("reptile", "offline"), checkpoint=None, data=None) -> dict:
    shots = tuple(cfg.shots if shots is None else shots)
    timer = _Timer()
    per_seed = {st.seed: timer.run("eval_s", fewshot_metrics, st, methods, shots)
                for st in _prepare(cfg, seeds, checkpoint, data)}
    report = make_report("eval-fewshot", cfg, per_seed,
                         extra={"methods": list(methods), "shots": [0] + list(shots)})
    _write(out, report, timer.t)
    return report


def cmd_eval_drift(cfg: ExperimentConfig, seeds, scenario: str, out=None, checkpoint=None,
                   data=None, traces: bool = False) -> dict:
    if scenario not in (SUDDEN_TURN, SPEED_SHIFT):
        raise ConfigError(f"unknown drift scenario {scenario!r}; use {SUDDEN_TURN} or "
                          f"{SPEED_SHIFT}")
    timer = _Timer()
    trace_dir = None
    if traces and out is not None:
        trace_dir = Path(out) / "traces"
        trace_dir.mkdir(parents=True, exist_ok=True)
    per_seed, events = {}, []
    for st in _prepare(cfg, seeds, checkpoint, data):
        per_seed[st.seed], ev = timer.run("eval_s", drift_metrics, st, scenario, trace_dir)
        events += [{"seed": st.seed, **e} for e in ev]
    report = make_report("eval-drift", cfg, per_seed, events,
                         extra={"scenario": scenario, "methods": list(DRIFT_METHODS)})
    _write(out, report, timer.t)
    return report


def cmd_eval_ho(cfg: ExperimentConfig, seeds, out=None, checkpoint=None, data=None) -> dict:
    timer = _Timer()
    per_seed = {st.seed: timer.run("eval_s", ho_metrics, st)
                for st in _prepare(cfg, seeds, checkpoint, data)}
    report = make_report("eval-ho", cfg, per_seed, extra={"methods": list(HO_METHODS)})
    _write(out, report, timer.t)
    return report


def cmd_report(run_dirs, out=None) -> dict:
    """Merge ``report.json`` files into one table (JSON + CSV)."""
    rows, runs = [], []
    for d in run_dirs:
        path = Path(d) / "report.json"
        if not path.exists():
            raise ConfigError(f"{d}: no report.json")
        rep = json.loads(path.read_text())
        label = rep["command"] + (f":{rep['scenario']}" if "scenario" in rep else "")
        runs.append({"run": str(d), "command": label, "config_hash": rep["config_hash"]})
        for key, a in sorted(rep["aggregate"].items()):
            method, _, metric = key.partition(".")
            rows.append({"experiment": label, "method": method, "metric": metric,
                         "mean": a["mean"], "std": a["std"], "n": a["n"]})
    table = {"tool": TOOL, "version": __version__, "runs": runs, "rows": rows}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(dumps_report(table))
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["experiment", "method", "metric", "mean", "std",
                                               "n"])
            w.writeheader()
            for r in rows:
                w.writerow({**r, "mean": repr(r["mean"]), "std": repr(r["std"])})
    return table
