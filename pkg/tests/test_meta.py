import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from driftcast.forecaster import grad_joint, objective
from driftcast.meta import (
    MetaConfig, fomaml_iteration, inner_adapt, mean_query_loss, meta_train, reptile_iteration,
    sample_episode,
)
from driftcast.mobility import Task
from driftcast.nn import sgd_step
from _helpers import SMALL, make_task, random_theta


@pytest.fixture(scope="module")
def tasks():
    rng = np.random.default_rng(11)
    return [make_task(rng, i) for i in range(5)]


# -- episodes -----------------------------------------------------------------


def test_episode_sizes_and_disjointness(tasks):
    support, query = sample_episode(tasks[0], np.random.default_rng(0))
    assert (len(support), len(query)) == (10, 20)
    assert not {id(s) for s in support} & {id(s) for s in query}


def test_episode_is_reproducible(tasks):
    a = sample_episode(tasks[0], np.random.default_rng(3))
    b = sample_episode(tasks[0], np.random.default_rng(3))
    assert [id(s) for s in a[0] + a[1]] == [id(s) for s in b[0] + b[1]]


def test_episode_rejects_small_task(tasks):
    small = Task(9, tasks[0].samples[:29])
    with pytest.raises(ValueError):
        sample_episode(small, np.random.default_rng(0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 15))
def test_episodes_never_overlap(seed, ns):
    task = Task(0, list(range(40)))
    support, query = sample_episode(task, np.random.default_rng(seed), ns, 40 - ns)
    assert set(support).isdisjoint(query)
    assert len(set(support) | set(query)) == 40


# -- inner loop -----------------------------------------------------------------


def test_inner_adapt_noops(tasks):
    theta = random_theta(SMALL, 1)
    support = tasks[0].samples[:10]
    assert np.array_equal(inner_adapt(theta, SMALL, support, 1e-2, 0).values, theta.values)
    assert np.array_equal(inner_adapt(theta, SMALL, support, 0.0, 5).values, theta.values)


def test_inner_adapt_two_steps_equals_manual_sgd(tasks):
    theta = random_theta(SMALL, 2)
    support = tasks[1].samples[:10]
    manual = theta
    for _ in range(2):
        _, g = grad_joint(manual, SMALL, support)
        manual = sgd_step(manual, g, 1e-2)
    got = inner_adapt(theta, SMALL, support, 1e-2, 2)
    assert np.array_equal(got.values, manual.values)


# -- reptile ------------------------------------------------------------------------


def test_reptile_zero_meta_step_is_identity(tasks):
    theta = random_theta(SMALL, 3)
    cfg = MetaConfig(meta_step=0.0)
    out = reptile_iteration(theta, SMALL, tasks[:2], cfg, np.random.default_rng(0))
    assert np.array_equal(out.values, theta.values)


def test_reptile_single_task_one_step_is_scaled_sgd(tasks):
    theta = random_theta(SMALL, 4)
    alpha, beta = 1e-2, 0.1
    cfg = MetaConfig(inner_lr=alpha, inner_steps=1, meta_step=beta)
    out = reptile_iteration(theta, SMALL, [tasks[2]], cfg, np.random.default_rng(5))
    support, _ = sample_episode(tasks[2], np.random.default_rng(5))
    _, g = grad_joint(theta, SMALL, support)
    np.testing.assert_allclose(out.values - theta.values, -alpha * beta * g.values,
                               rtol=0, atol=1e-12)


def test_reptile_opposite_deltas_cancel(monkeypatch, tasks):
    import driftcast.meta as meta

    theta = random_theta(SMALL, 5)
    v = np.random.default_rng(0).normal(size=len(theta))
    signs = iter([1.0, -1.0])
    monkeypatch.setattr(meta, "inner_adapt",
                        lambda th, *a, **k: th.with_values(th.values + next(signs) * v))
    out = reptile_iteration(theta, SMALL, tasks[:2], MetaConfig(), np.random.default_rng(0))
    np.testing.assert_allclose(out.values, theta.values, rtol=0, atol=1e-15)


def test_layout_preserved(tasks):
    theta = random_theta(SMALL, 6)
    rng = np.random.default_rng(0)
    for step in (reptile_iteration, fomaml_iteration):
        assert step(theta, SMALL, tasks[:2], MetaConfig(inner_steps=1), rng).layout == theta.layout


# -- fomaml ----------------------------------------------------------------------------


def test_fomaml_zero_meta_step_is_identity(tasks):
    theta = random_theta(SMALL, 7)
    out = fomaml_iteration(theta, SMALL, tasks[:2], MetaConfig(meta_step=0.0),
                           np.random.default_rng(0))
    assert np.array_equal(out.values, theta.values)


def test_fomaml_without_adaptation_is_query_sgd(tasks):
    theta = random_theta(SMALL, 8)
    cfg = MetaConfig(inner_steps=0, meta_step=0.1)
    out = fomaml_iteration(theta, SMALL, [tasks[3]], cfg, np.random.default_rng(9))
    _, query = sample_episode(tasks[3], np.random.default_rng(9))
    _, g = grad_joint(theta, SMALL, query)
    np.testing.assert_allclose(out.values, theta.values - 0.1 * g.values, rtol=0, atol=1e-15)


def test_fomaml_gradient_taken_at_adapted_point(tasks):
    theta = random_theta(SMALL, 9)
    cfg = MetaConfig(inner_steps=3)
    seen = []
    fomaml_iteration(theta, SMALL, [tasks[4]], cfg, np.random.default_rng(2),
                     hook=lambda where, point, g: seen.append((point.values.copy(), g.values)))
    support, query = sample_episode(tasks[4], np.random.default_rng(2))
    adapted = inner_adapt(theta, SMALL, support, cfg.inner_lr, cfg.inner_steps)
    (point, g), = seen
    assert np.array_equal(point, adapted.values)
    assert not np.array_equal(point, theta.values)
    assert np.array_equal(g, grad_joint(adapted, SMALL, query)[1].values)


# -- meta_train ---------------------------------------------------------------------------


def test_meta_train_zero_iterations(tasks):
    theta = random_theta(SMALL, 10)
    out, history = meta_train(theta, SMALL, tasks, MetaConfig(iterations=0))
    assert np.array_equal(out.values, theta.values)
    assert history == []


def test_meta_train_requires_tasks():
    with pytest.raises(ValueError):
        meta_train(random_theta(SMALL, 0), SMALL, [], MetaConfig(iterations=1))


@pytest.mark.parametrize("method", ["reptile", "fomaml"])
def test_meta_train_is_deterministic(tasks, method):
    cfg = MetaConfig(iterations=4, inner_steps=2, task_batch=2, seed=3)
    theta = SMALL.init(0)
    a, ha = meta_train(theta, SMALL, tasks, cfg, method)
    b, hb = meta_train(theta, SMALL, tasks, cfg, method)
    assert a.values.tobytes() == b.values.tobytes()
    assert ha == hb


def test_meta_train_lowers_query_loss(tasks):
    cfg = MetaConfig(iterations=60, inner_lr=1e-2, inner_steps=3, meta_step=0.5,
                     task_batch=3, eval_every=20, seed=1)
    theta0 = SMALL.init(1)
    theta, history = meta_train(theta0, SMALL, tasks, cfg)
    assert [it for it, _ in history] == [0, 20, 40, 60]
    assert history[-1][1] < history[0][1]
    assert history[0][1] == mean_query_loss(theta0, SMALL, tasks, cfg, cfg.seed + 7919)


def test_history_does_not_affect_updates(tasks):
    base = dict(iterations=5, inner_steps=1, task_batch=2, seed=4)
    a, _ = meta_train(SMALL.init(2), SMALL, tasks, MetaConfig(eval_every=1, **base))
    b, _ = meta_train(SMALL.init(2), SMALL, tasks, MetaConfig(eval_every=50, **base))
    assert np.array_equal(a.values, b.values)


def test_meta_config_validation():
    with pytest.raises(ValueError):
        MetaConfig(meta_step=1.5)
    with pytest.raises(ValueError):
        MetaConfig(inner_lr=-1.0)


def test_objective_used_for_history_is_joint_loss(tasks):
    theta = random_theta(SMALL, 12)
    q = tasks[0].samples[:5]
    assert objective(theta, SMALL, q) == grad_joint(theta, SMALL, q)[0]

