import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from driftcast.forecaster import Sample
from driftcast.mobility import (
    EARTH_RADIUS, SPEED_SHIFT, SUDDEN_TURN, DriftEvent, EmptyIngestWarning, IngestError,
    SplitSpec, Task, TrajectoryConfig, attach_radio, derive_kinematics, generate_trajectory,
    ingest_geolife_csv, kmeans, kmeans_tasks, make_samples, split_tasks, tile_tasks,
    wrap_angle,
)
from driftcast.radio import RadioEnvironment

STRAIGHT = dict(speed=1.0, heading_noise=0.0, gps_sigma=0.0, heading0=0.0)


# -- generator ------------------------------------------------------------------


def test_straight_line():
    tr = generate_trajectory(TrajectoryConfig(duration=20, **STRAIGHT))
    np.testing.assert_array_equal(tr.pos, np.column_stack([np.arange(20.0), np.zeros(20)]))


def test_sudden_turn_makes_orthogonal_steps():
    turn = DriftEvent(SUDDEN_TURN, 10, math.pi / 2)
    tr = generate_trajectory(TrajectoryConfig(duration=20, drift=(turn,), **STRAIGHT))
    d = np.diff(tr.pos, axis=0)
    before, after = d[:10], d[10:]
    np.testing.assert_allclose(before, [[1.0, 0.0]] * 10, atol=0)
    assert np.abs(after @ before[0]).max() < 1e-12
    np.testing.assert_allclose(np.linalg.norm(after, axis=1), 1.0, rtol=1e-15)


def test_speed_shift_doubles_step_length():
    shift = DriftEvent(SPEED_SHIFT, 10, 2.0)
    tr = generate_trajectory(TrajectoryConfig(duration=20, drift=(shift,), **STRAIGHT))
    step = np.linalg.norm(np.diff(tr.pos, axis=0), axis=1)
    np.testing.assert_array_equal(step[:10], 1.0)
    np.testing.assert_array_equal(step[10:], 2.0)


def test_generator_is_deterministic():
    cfg = TrajectoryConfig(duration=50, heading_noise=0.1, gps_sigma=1.0, seed=4, heading0=None)
    a, b = generate_trajectory(cfg), generate_trajectory(cfg)
    assert a.pos.tobytes() == b.pos.tobytes()


@pytest.mark.parametrize("seed", range(10))
def test_reported_steps_are_bounded(seed):
    shift = DriftEvent(SPEED_SHIFT, 40, 2.0)
    cfg = TrajectoryConfig(duration=120, speed=3.0, heading_noise=0.1, gps_sigma=1.0,
                           drift=(shift,), seed=seed)
    tr = generate_trajectory(cfg)
    assert np.linalg.norm(np.diff(tr.pos, axis=0), axis=1).max() <= 6.0 + 6 * 1.0


def test_drift_event_validation():
    with pytest.raises(ValueError):
        DriftEvent(SUDDEN_TURN, 5, math.pi / 4)
    with pytest.raises(ValueError):
        DriftEvent(SPEED_SHIFT, 5, 1.2)
    DriftEvent(SUDDEN_TURN, 5, -math.pi / 2)
    DriftEvent(SPEED_SHIFT, 5, 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        TrajectoryConfig(speed=0.0)
    with pytest.raises(ValueError):
        TrajectoryConfig(duration=1)


@given(st.floats(-50, 50))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


# -- kinematics -------------------------------------------------------------------------


def test_kinematics_straight_line():
    speed, heading = derive_kinematics(np.column_stack([np.arange(10.0), np.zeros(10)]))
    np.testing.assert_array_equal(speed, 1.0)
    np.testing.assert_array_equal(heading, 0.0)


def test_kinematics_two_points():
    speed, heading = derive_kinematics([[0.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(speed, [1.0, 1.0])
    np.testing.assert_allclose(heading, [math.pi / 2] * 2, rtol=0, atol=0)


def test_kinematics_median_filter_removes_spike():
    # raw finite-difference speeds 1, 1, 9, 1
    speed, _ = derive_kinematics([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0]])
    np.testing.assert_array_equal(speed, 1.0)


def test_kinematics_reproduce_configured_speed():
    tr = generate_trajectory(TrajectoryConfig(duration=30, speed=1.7, heading_noise=0.0,
                                              heading0=0.7))
    speed, heading = derive_kinematics(tr.pos)
    np.testing.assert_allclose(speed, 1.7, rtol=1e-12)
    np.testing.assert_allclose(heading, 0.7, rtol=1e-12)


# -- ingestion ------------------------------------------------------------------------------


def write_csv(path, rows, header="time,lat,lon"):
    path.write_text(header + "\n" + "".join(",".join(map(str, r)) + "\n" for r in rows))
    return path


def test_ingest_stationary_pair(tmp_path):
    segs = ingest_geolife_csv(write_csv(tmp_path / "a.csv", [(0, 39.9, 116.3), (1, 39.9, 116.3)]))
    assert len(segs) == 1
    assert len(segs[0]) == 2
    np.testing.assert_array_equal(segs[0].speed, 0.0)


def test_ingest_splits_on_gap(tmp_path):
    rows = [(t, 39.9, 116.3 + 1e-5 * t) for t in (0, 1, 2, 12, 13, 14)]
    segs = ingest_geolife_csv(write_csv(tmp_path / "a.csv", rows))
    assert [len(s) for s in segs] == [3, 3]


def test_ingest_drops_implausible_speed(tmp_path):
    dlat = math.degrees(100.0 / EARTH_RADIUS)
    rows = [(0, 39.9, 116.3), (1, 39.9, 116.3), (2, 39.9 + dlat, 116.3),
            (10, 39.9, 116.3), (11, 39.9, 116.3)]
    segs = ingest_geolife_csv(write_csv(tmp_path / "a.csv", rows))
    assert [len(s) for s in segs] == [2]


def test_ingest_resamples_to_whole_seconds(tmp_path):
    dlon = math.degrees(1.0 / (EARTH_RADIUS * math.cos(math.radians(40.0))))
    rows = [(0.5, 40.0, 116.0), (2.5, 40.0, 116.0 + 2 * dlon), (4.5, 40.0, 116.0 + 4 * dlon)]
    (seg,) = ingest_geolife_csv(write_csv(tmp_path / "a.csv", rows))
    np.testing.assert_array_equal(np.diff(seg.t), 1.0)
    assert len(seg) == 4
    np.testing.assert_allclose(seg.speed, 1.0, rtol=1e-6)


def test_ingest_iso_timestamps(tmp_path):
    rows = [("2008-10-23T02:53:04Z", 39.9, 116.3), ("2008-10-23T02:53:05Z", 39.9, 116.3)]
    assert len(ingest_geolife_csv(write_csv(tmp_path / "a.csv", rows))) == 1


def test_ingest_reports_bad_line(tmp_path):
    path = write_csv(tmp_path / "a.csv", [(0, 39.9, 116.3), (1, "north", 116.3)])
    with pytest.raises(IngestError) as exc:
        ingest_geolife_csv(path)
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_ingest_rejects_wrong_header(tmp_path):
    with pytest.raises(IngestError):
        ingest_geolife_csv(write_csv(tmp_path / "a.csv", [(0, 1, 2)], header="a,b,c"))


def test_ingest_warns_when_nothing_usable(tmp_path):
    path = write_csv(tmp_path / "a.csv", [(0, 39.9, 116.3)])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert ingest_geolife_csv(path) == []
    assert any(issubclass(w.category, EmptyIngestWarning) for w in caught)


# -- windows and tasks ------------------------------------------------------------------------


def line_track(n, **kw):
    traj = generate_trajectory(TrajectoryConfig(duration=n, **STRAIGHT, **kw))
    return attach_radio(traj, RadioEnvironment.grid(2, 2))


@pytest.mark.parametrize("n,stride,count", [(13, 1, 1), (14, 1, 2), (16, 2, 2), (20, 2, 4),
                                            (12, 1, 0)])
def test_make_samples_counts(n, stride, count):
    assert len(make_samples(line_track(n), 10, 3, stride)) == count


def test_make_samples_targets():
    tr = line_track(16)
    s = make_samples(tr, 10, 3)[2]
    np.testing.assert_array_equal(s.window[:, 0], np.arange(2, 12))
    np.testing.assert_array_equal(s.target_pos, tr.pos[12:15])
    cells = tr.cell[11:15]
    np.testing.assert_array_equal(s.target_ho, cells[1:] != cells[:-1])


def window_at(points):
    points = np.asarray(points, dtype=np.float64)
    k = len(points)
    rows = np.column_stack([np.arange(k), points, np.full(k, -80.0), np.zeros((k, 3))])
    return Sample(rows, np.zeros((1, 2)), np.zeros(1))


def test_tiles_single_task():
    samples = [window_at([[10.0 + i, 20.0]] * 10) for i in range(5)]
    (task,) = tile_tasks(samples, 500.0)
    assert len(task) == 5


def test_tiles_majority_rule():
    pts = [[100.0, 100.0]] * 6 + [[600.0, 100.0]] * 4
    tasks = tile_tasks([window_at(pts)], 500.0)
    (hit,) = [t for t in tasks if len(t)]
    assert hit.center == (250.0, 250.0)


def test_tiles_tie_goes_to_last_observation():
    pts = [[100.0, 100.0]] * 5 + [[600.0, 100.0]] * 5
    tasks = tile_tasks([window_at(pts)], 500.0)
    (hit,) = [t for t in tasks if len(t)]
    assert hit.center == (750.0, 250.0)
    pts = pts[::-1]
    (hit,) = [t for t in tile_tasks([window_at(pts)], 500.0) if len(t)]
    assert hit.center == (250.0, 250.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_every_sample_in_exactly_one_tile(seed):
    rng = np.random.default_rng(seed)
    samples = [window_at(rng.uniform(0, 2000, (4, 2))) for _ in range(25)]
    tasks = tile_tasks(samples, 500.0)
    ids = [id(s) for t in tasks for s in t.samples]
    assert sorted(ids) == sorted(id(s) for s in samples)


def test_kmeans_separates_clouds():
    rng = np.random.default_rng(0)
    a = rng.normal([0, 0], 5.0, (40, 2))
    b = rng.normal([1000, 1000], 5.0, (40, 2))
    x = np.vstack([a, b])
    labels, centers = kmeans(x, 2, seed=3)
    assert len(set(labels[:40])) == 1 and len(set(labels[40:])) == 1
    assert labels[0] != labels[40]
    # each point sits with its nearest centre (brute force)
    for p, lab in zip(x, labels):
        assert lab == min(range(2), key=lambda j: np.sum((p - centers[j]) ** 2))


def test_kmeans_single_cluster_and_determinism():
    rng = np.random.default_rng(1)
    samples = [window_at(rng.uniform(0, 100, (4, 2))) for _ in range(12)]
    (only,) = kmeans_tasks(samples, 1)
    assert len(only) == 12
    x = rng.uniform(0, 100, (50, 2))
    assert np.array_equal(kmeans(x, 4, seed=7)[0], kmeans(x, 4, seed=7)[0])
    with pytest.raises(ValueError):
        kmeans(x, 51)


# -- splits ------------------------------------------------------------------------------------


@pytest.mark.parametrize("n,sizes", [(10, (6, 2, 2)), (30, (18, 6, 6))])
def test_split_sizes(n, sizes):
    parts = split_tasks([Task(i, []) for i in range(n)])
    assert tuple(map(len, parts)) == sizes


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 80), st.integers(0, 1000))
def test_split_is_seeded_partition(n, seed):
    tasks = [Task(i, []) for i in range(n)]
    parts = split_tasks(tasks, SplitSpec(seed=seed))
    again = split_tasks(tasks, SplitSpec(seed=seed))
    ids = [[t.tile_id for t in p] for p in parts]
    assert ids == [[t.tile_id for t in p] for p in again]
    flat = [i for p in ids for i in p]
    assert sorted(flat) == list(range(n))


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec((0.5, 0.2, 0.2))
