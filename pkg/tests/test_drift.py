import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from driftcast.baselines import train_offline
from driftcast.drift import (
    AdaptConfig, EwmaDetectorState, compact_adapt, detector_update, residual, run_stream,
    trace_columns, write_trace_csv,
)
from driftcast.forecaster import ModelConfig, grad_joint, objective, predict
from driftcast.mobility import (
    SUDDEN_TURN, DriftEvent, Track, TrajectoryConfig, attach_radio, generate_trajectory,
    make_samples,
)
from driftcast.nn import ParamVector, add, scale, sgd_step, sub
from driftcast.radio import RadioEnvironment
from _helpers import SMALL, make_sample, random_theta

# -- residual -----------------------------------------------------------------


def test_residual_examples():
    assert residual([2.0, -1.0], [2.0, -1.0]) == 0.0
    assert residual([0.0, 0.0], [3.0, 4.0]) == 5.0


@given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4))
def test_residual_symmetric(v):
    assert residual(v[:2], v[2:]) == residual(v[2:], v[:2])


# -- detector --------------------------------------------------------------------


def feed(state, residuals):
    fired = []
    for r in residuals:
        state, f = detector_update(state, r)
        fired.append(f)
    return state, fired


def test_ewma_update_formula():
    state, fired = detector_update(EwmaDetectorState(), 1.0)
    assert state.s == pytest.approx(0.2, abs=1e-15)
    assert not fired


def test_flat_ring_at_mean_does_not_trigger():
    state = EwmaDetectorState(s=1.0, ring=(1.0,) * 100)
    state, fired = detector_update(state, 1.0)
    assert state.s == 1.0 and not fired


def test_flat_ring_triggers_strictly_above_mean():
    state = EwmaDetectorState(s=1.0, ring=(1.0,) * 100)
    _, fired = detector_update(state, 1.5)
    assert fired


def test_jump_detected_within_five_steps():
    rng = np.random.default_rng(0)
    state, fired = feed(EwmaDetectorState(), rng.normal(1.0, 0.01, 50))
    state, fired = feed(state, [10.0] * 5)
    assert any(fired)


def test_stationary_stream_with_wide_threshold_is_silent():
    rng = np.random.default_rng(1)
    _, fired = feed(EwmaDetectorState(gamma=6.0), np.abs(rng.normal(1.0, 0.01, 1000)))
    assert not any(fired)


def test_threshold_excludes_current_residual():
    ring = (1.0, 2.0, 3.0)
    state, _ = detector_update(EwmaDetectorState(ring=ring, warmup_min=3), 50.0)
    assert state.mu == pytest.approx(2.0)
    assert state.sigma == pytest.approx(np.std(ring))
    assert state.ring == ring + (50.0,)


def test_negative_residual_rejected():
    with pytest.raises(ValueError):
        detector_update(EwmaDetectorState(), -0.1)
    with pytest.raises(ValueError):
        detector_update(EwmaDetectorState(), math.nan)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 50.0), min_size=1, max_size=200),
       st.integers(0, 30), st.integers(0, 15), st.integers(1, 60))
def test_warmup_cooldown_and_ring_bounds(residuals, warmup, cooldown, window):
    state = EwmaDetectorState(warmup_min=warmup, cooldown=cooldown, window=window)
    since_trigger = None
    for r in residuals:
        before = len(state.ring)
        state, fired = detector_update(state, r)
        assert state.s >= 0.0
        assert len(state.ring) <= window
        if fired:
            assert before >= warmup
            assert since_trigger is None or since_trigger > cooldown
            since_trigger = 1
        elif since_trigger is not None:
            since_trigger += 1


# -- compact adaptation -------------------------------------------------------------


@pytest.fixture(scope="module")
def buffer():
    rng = np.random.default_rng(21)
    return [make_sample(rng) for _ in range(10)]


def test_compact_adapt_zero_steps(buffer):
    theta = random_theta(SMALL, 1)
    out = compact_adapt(theta, theta.copy(), SMALL, buffer, AdaptConfig(k_steps=0))
    assert np.array_equal(out.values, theta.values)


def test_compact_adapt_matches_manual_composition(buffer):
    theta_star = random_theta(SMALL, 2)
    theta = theta_star.with_values(theta_star.values + 0.05)
    cfg = AdaptConfig(n_adapt=10, k_steps=5, lr=1e-3, lambda_reg=1e-4)
    manual = theta
    for _ in range(5):
        _, g = grad_joint(manual, SMALL, buffer)
        manual = sgd_step(manual, add(g, scale(sub(manual, theta_star), 2.0 * 1e-4)), 1e-3)
    got = compact_adapt(theta, theta_star, SMALL, buffer, cfg)
    np.testing.assert_allclose(got.values, manual.values, rtol=0, atol=1e-15)


def test_regularizer_gradient_is_closed_form(buffer):
    theta_star = random_theta(SMALL, 3)
    theta = random_theta(SMALL, 4)
    lr = 1e-3
    plain = compact_adapt(theta, theta_star, SMALL, buffer, AdaptConfig(k_steps=1, lr=lr,
                                                                        lambda_reg=0.0))
    reg = compact_adapt(theta, theta_star, SMALL, buffer, AdaptConfig(k_steps=1, lr=lr,
                                                                      lambda_reg=1.0))
    np.testing.assert_allclose(plain.values - reg.values,
                               lr * 2.0 * (theta.values - theta_star.values), rtol=0, atol=1e-15)


def test_compact_adapt_rejects_empty_buffer():
    theta = random_theta(SMALL, 0)
    with pytest.raises(ValueError):
        compact_adapt(theta, theta, SMALL, [], AdaptConfig())


def test_adaptation_rarely_increases_buffer_loss():
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng([seed, 3])
        buf = [make_sample(rng) for _ in range(10)]
        theta = random_theta(SMALL, seed, scale=0.3)
        after = compact_adapt(theta, theta, SMALL, buf, AdaptConfig())
        assert np.all(np.isfinite(after.values))
        wins += objective(after, SMALL, buf) <= objective(theta, SMALL, buf)
    assert wins >= 18


# -- streams --------------------------------------------------------------------------


def still_track(n=30):
    z = np.zeros(n)
    return Track(np.arange(n), np.tile([12.0, -7.0], (n, 1)), z, z, z - 80.0,
                 z.astype(int), z.astype(int))


def test_zero_residual_stream_never_adapts():
    theta = ParamVector.zeros(SMALL.layout())
    trace = run_stream(theta, SMALL, still_track(), policy="ewma")
    assert np.all(trace.residual[1:] == 0.0)
    assert not trace.triggered.any()
    assert np.array_equal(trace.theta.values, theta.values)


def test_disabled_detector_equals_plain_forecasting():
    env = RadioEnvironment.grid(2, 2)
    tr = attach_radio(generate_trajectory(TrajectoryConfig(duration=60, seed=3, gps_sigma=0.5)),
                      env)
    theta = random_theta(SMALL, 5, scale=0.2)
    trace = run_stream(theta, SMALL, tr, detector=EwmaDetectorState(gamma=math.inf))
    samples = make_samples(tr, SMALL.k, SMALL.H)
    assert trace.n_adaptations == 0
    for i, s in enumerate(samples):
        out = predict(theta, SMALL, s)
        assert np.array_equal(trace.pred[i], out.pred_pos)


def test_short_stream_rejected():
    with pytest.raises(ValueError):
        run_stream(random_theta(SMALL, 0), SMALL, still_track(SMALL.k + SMALL.H - 1))


def test_always_policy_uses_only_labelled_samples():
    theta = random_theta(SMALL, 6, scale=0.2)
    tr = attach_radio(generate_trajectory(TrajectoryConfig(duration=40, seed=1)),
                      RadioEnvironment.grid(2, 2))
    adapt = AdaptConfig(n_adapt=4, k_steps=1)
    trace = run_stream(theta, SMALL, tr, adapt, policy="always")
    first = SMALL.H + adapt.n_adapt - 1
    assert not trace.adapted[:first].any() and trace.adapted[first:].all()
    assert all(e["buffer"] == 4 for e in trace.events)
    times = [e["t"] for e in trace.events]
    assert all(b > a for a, b in zip(times, times[1:]))


def test_unknown_policy_rejected():
    with pytest.raises(ValueError):
        run_stream(random_theta(SMALL, 0), SMALL, still_track(), policy="sometimes")


def test_trace_csv_columns(tmp_path):
    trace = run_stream(ParamVector.zeros(SMALL.layout()), SMALL, still_track(12))
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == trace_columns(SMALL.H)
    assert rows[0][:3] == ["step", "pred_x1", "pred_y1"]
    assert len(rows) == len(trace) + 1


def test_sudden_turn_triggers_after_the_turn():
    env = RadioEnvironment.grid(2, 2)
    cfg = ModelConfig(k=5, H=2, hidden_dim=8, head_layers=(16,))

    def traj(seed, drift=()):
        tc = TrajectoryConfig(duration=100 if drift else 80, speed=2.0, heading_noise=0.02,
                              gps_sigma=0.1, seed=seed, heading0=None, start=(400.0, 400.0),
                              drift=drift)
        return attach_radio(generate_trajectory(tc), env)

    train = [s for seed in range(20) for s in make_samples(traj(seed), cfg.k, cfg.H)]
    theta, _ = train_offline(cfg.init(0), cfg, train, epochs=15, batch_size=32, lr=3e-3)
    turn = DriftEvent(SUDDEN_TURN, 60, math.pi / 2)
    trace = run_stream(theta, cfg, traj(5, (turn,)))
    fired = trace.t[trace.triggered]
    assert np.any((fired > 60) & (fired <= 70))
