"""Reference hyperparameters and protocol constants, pinned at their defaults."""

import pytest

from driftcast.config import ExperimentConfig
from driftcast.drift import AdaptConfig, EwmaDetectorState
from driftcast.estimators import EwmaDriftDetector, MetaForecaster, OnlineAdapter
from driftcast.forecaster import ModelConfig
from driftcast.meta import MetaConfig
from driftcast.mobility import SplitSpec, split_tasks

REFERENCE = {
    "hidden_dim": 64,
    "head_layers": (64, 64),
    "H": 3,
    "inner_steps": 5,
    "inner_lr": 1e-2,
    "meta_step": 0.1,
    "support_size": 10,
    "query_size": 20,
    "n_adapt": 10,
    "adapt_steps": 5,
    "adapt_lr": 1e-3,
    "lambda_reg": 1e-4,
    "ewma_lambda": 0.2,
    "ewma_window": 100,
    "ewma_gamma": 2.0,
    "meta_iterations": 1000,
    "seeds": 5,
    "shots": (1, 5, 10, 20),
    "split_train": 0.6,
    "split_val": 0.2,
    "split_test": 0.2,
}


@pytest.mark.parametrize("name,value", sorted(REFERENCE.items()))
def test_experiment_default(name, value):
    assert getattr(ExperimentConfig(), name) == value


def test_window_default():
    assert ExperimentConfig().k == 10


def test_component_defaults_agree():
    cfg = ExperimentConfig()
    m = ModelConfig()
    assert (m.hidden_dim, m.head_layers, m.H, m.k) == (64, (64, 64), 3, 10)
    meta = MetaConfig()
    assert (meta.inner_steps, meta.inner_lr, meta.meta_step, meta.support_size,
            meta.query_size, meta.iterations) == (5, 1e-2, 0.1, 10, 20, 1000)
    a = AdaptConfig()
    assert (a.n_adapt, a.k_steps, a.lr, a.lambda_reg) == (10, 5, 1e-3, 1e-4)
    d = EwmaDetectorState()
    assert (d.lam, d.window, d.gamma) == (0.2, 100, 2.0)
    # derived configs carry the same numbers
    assert cfg.model() == ModelConfig()
    assert cfg.adapt() == AdaptConfig()
    assert cfg.detector() == EwmaDetectorState()
    assert cfg.meta() == MetaConfig(eval_every=cfg.eval_every)


def test_estimator_defaults_agree():
    meta = MetaForecaster()
    assert (meta.inner_steps, meta.inner_lr, meta.meta_step, meta.support_size,
            meta.query_size, meta.iterations, meta.hidden_dim) == (5, 1e-2, 0.1, 10, 20, 1000, 64)
    det = EwmaDriftDetector()
    assert (det.lam, det.window, det.gamma) == (0.2, 100, 2.0)
    ad = OnlineAdapter()
    assert (ad.n_adapt, ad.k_steps, ad.lr, ad.lambda_reg) == (10, 5, 1e-3, 1e-4)


def test_ten_tasks_split_six_two_two():
    train, val, test = split_tasks(list(range(10)))
    assert (len(train), len(val), len(test)) == (6, 2, 2)
    assert SplitSpec().fractions == (0.6, 0.2, 0.2)
