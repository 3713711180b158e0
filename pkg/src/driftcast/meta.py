"""Reptile and first-order MAML meta-training over spatial tasks."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .forecaster import ModelConfig, grad_joint, objective, stack_samples
from .mobility import Task
from .nn import ParamVector, sgd_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetaConfig:
    inner_lr: float = 1e-2
    inner_steps: int = 5
    meta_step: float = 0.1
    iterations: int = 1000
    task_batch: int = 5
    support_size: int = 10
    query_size: int = 20
    seed: int = 0
    eval_every: int = 50

    def __post_init__(self):
        if self.inner_lr < 0 or self.inner_steps < 0 or self.iterations < 0:
            raise ValueError("inner_lr, inner_steps and iterations must be non-negative")
        if not 0 <= self.meta_step <= 1:
            raise ValueError("meta_step must lie in [0, 1]")
        if self.task_batch < 1 or self.support_size < 1 or self.query_size < 1:
            raise ValueError("batch and set sizes must be positive")


def sample_episode(task: Task, rng: np.random.Generator, support_size: int | None = None,
                   query_size: int | None = None):
    """Disjoint support/query draws without replacement."""
    ns = task.support_size if support_size is None else support_size
    nq = task.query_size if query_size is None else query_size
    if len(task.samples) < ns + nq:
        raise ValueError(f"task {task.tile_id} has {len(task.samples)} samples, "
                         f"needs {ns + nq} for an episode")
    idx = rng.choice(len(task.samples), size=ns + nq, replace=False)
    support = [task.samples[i] for i in idx[:ns]]
    query = [task.samples[i] for i in idx[ns:]]
    return support, query


def inner_adapt(theta: ParamVector, config: ModelConfig, support, lr: float, steps: int,
                hook: Callable | None = None) -> ParamVector:
    """``steps`` full-batch SGD steps on the mean joint loss over ``support``."""
    if steps == 0 or lr == 0:
        return theta.copy()
    batch = stack_samples(support)
    for _ in range(steps):
        _, g = grad_joint(theta, config, batch)
        if hook is not None:
            hook("inner", theta, g)
        theta = sgd_step(theta, g, lr)
    return theta


def _sample_batch(tasks: Sequence[Task], cfg: MetaConfig, rng):
    n = min(cfg.task_batch, len(tasks))
    return [tasks[i] for i in sorted(rng.choice(len(tasks), size=n, replace=False))]


def reptile_iteration(theta: ParamVector, config: ModelConfig, tasks_batch: Sequence[Task],
                      cfg: MetaConfig, rng: np.random.Generator) -> ParamVector:
    """``theta + meta_step * mean(theta_task - theta)`` over the task batch."""
    if not tasks_batch:
        raise ValueError("empty task batch")
    delta = np.zeros(len(theta))
    for task in tasks_batch:
        support, _ = sample_episode(task, rng, cfg.support_size, cfg.query_size)
        adapted = inner_adapt(theta, config, support, cfg.inner_lr, cfg.inner_steps)
        delta += adapted.values - theta.values
    return theta.with_values(theta.values + cfg.meta_step * (delta / len(tasks_batch)))


def fomaml_iteration(theta: ParamVector, config: ModelConfig, tasks_batch: Sequence[Task],
                     cfg: MetaConfig, rng: np.random.Generator,
                     hook: Callable | None = None) -> ParamVector:
    """First-order MAML: query gradients taken at the adapted parameters, applied to ``theta``."""
    if not tasks_batch:
        raise ValueError("empty task batch")
    total = np.zeros(len(theta))
    for task in tasks_batch:
        support, query = sample_episode(task, rng, cfg.support_size, cfg.query_size)
        adapted = inner_adapt(theta, config, support, cfg.inner_lr, cfg.inner_steps)
        _, g = grad_joint(adapted, config, query)
        if hook is not None:
            hook("outer", adapted, g)
        total += g.values
    return theta.with_values(theta.values - cfg.meta_step * (total / len(tasks_batch)))


def mean_query_loss(theta: ParamVector, config: ModelConfig, tasks: Sequence[Task],
                    cfg: MetaConfig, seed: int) -> float:
    """Post-adaptation query loss averaged over one fixed episode per task."""
    rng = np.random.default_rng(seed)
    losses = []
    for task in tasks:
        support, query = sample_episode(task, rng, cfg.support_size, cfg.query_size)
        adapted = inner_adapt(theta, config, support, cfg.inner_lr, cfg.inner_steps)
        losses.append(objective(adapted, config, query))
    return float(np.mean(losses))


def meta_train(theta0: ParamVector, config: ModelConfig, tasks: Sequence[Task], cfg: MetaConfig,
               method: str = "reptile", val_tasks: Sequence[Task] | None = None):
    """Run ``cfg.iterations`` meta-iterations. Returns ``(theta_star, history)``.

    ``history`` holds ``(iteration, mean query loss)`` pairs measured on
    ``val_tasks`` (or the training tasks) every ``eval_every`` iterations and at
    the end; it never feeds back into the updates.
    """
    if not tasks:
        raise ValueError("meta_train needs at least one task")
    step = {"reptile": reptile_iteration, "fomaml": fomaml_iteration}[method]
    rng = np.random.default_rng(cfg.seed)
    monitor = list(val_tasks) if val_tasks else list(tasks)
    eval_seed = cfg.seed + 7919
    theta = theta0.copy()
    history = []
    if cfg.iterations == 0:
        return theta, history
    history.append((0, mean_query_loss(theta, config, monitor, cfg, eval_seed)))
    for it in range(1, cfg.iterations + 1):
        theta = step(theta, config, _sample_batch(tasks, cfg, rng), cfg, rng)
        if it % cfg.eval_every == 0 or it == cfg.iterations:
            history.append((it, mean_query_loss(theta, config, monitor, cfg, eval_seed)))
            logger.debug("%s iteration %d: query loss %.5f", method, it, history[-1][1])
    return theta, history
