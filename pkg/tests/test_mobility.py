import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlcmvr import mobility as mob
from vlcmvr.mobility import MobilityParams, Phase, Room, UserState

ROOM = Room(8.0, 4.0)
PARAMS = MobilityParams()


def test_room_validation():
    with pytest.raises(ValueError):
        Room(0.0, 1.0)
    with pytest.raises(ValueError):
        MobilityParams(v_min=2.0, v_max=1.0)
    with pytest.raises(ValueError):
        MobilityParams(pause_min=-1.0)


def test_rwp_init_deterministic_and_inside():
    a = mob.rwp_init(ROOM, PARAMS, 1, rng_seed=42)
    b = mob.rwp_init(ROOM, PARAMS, 1, rng_seed=42)
    assert np.array_equal(a[0].position, b[0].position) and a[0].speed == b[0].speed
    states = mob.rwp_init(ROOM, MobilityParams(0.1, 1.0, 0.0, 1.0), 500, rng_seed=1)
    assert len(states) == 500
    for s in states:
        assert ROOM.contains(s.position) and ROOM.contains(s.waypoint)
        assert 0.1 <= s.speed <= 1.0
        assert s.pause_remaining >= 0
    assert any(s.phase is Phase.PAUSED for s in states)
    with pytest.raises(ValueError):
        mob.rwp_init(ROOM, PARAMS, 0)


def _cell_freq(pos, n=3):
    idx = np.minimum((pos * n).astype(int), n - 1)
    counts = np.zeros((n, n))
    np.add.at(counts, (idx[:, 0], idx[:, 1]), 1)
    return counts / len(pos)


def test_stationary_density_matches_time_average():
    unit = Room(1.0, 1.0)
    params = MobilityParams(0.1, 1.0, 0.0, 1.0)
    n = 20_000
    init = np.array([s.position for s in mob.rwp_init(unit, params, n, rng_seed=5)])
    f_init = _cell_freq(init)
    # centre denser than corners
    corners = np.mean([f_init[0, 0], f_init[0, 2], f_init[2, 0], f_init[2, 2]])
    assert corners / f_init[1, 1] < 1

    # time average of one long trajectory, sampled sparsely to decorrelate
    traj = mob.trajectory(mob.rwp_init(unit, params, 1, rng_seed=6), n, 4.0, params, unit, seed=7)[:, 0]
    f_time = _cell_freq(traj)
    for f in (f_init[1, 1], corners):
        pass
    for (i, j) in [(1, 1), (0, 0), (2, 2), (0, 1)]:
        p = (f_init[i, j] + f_time[i, j]) / 2
        sigma = math.sqrt(2 * p * (1 - p) / n)
        assert abs(f_init[i, j] - f_time[i, j]) < 3 * sigma * 1.5, (i, j, f_init[i, j], f_time[i, j])


def test_step_small_dt_exact_displacement():
    s = UserState([1.0, 1.0], [5.0, 1.0], 0.5)
    out = mob.rwp_step(s, 0.2, PARAMS, ROOM, np.random.default_rng(0))
    assert out.position == pytest.approx([1.1, 1.0], abs=1e-15)
    assert out.phase is Phase.MOVING


def test_step_exactly_reaching_waypoint_pauses():
    s = UserState([1.0, 1.0], [2.0, 1.0], 0.5)
    out = mob.rwp_step(s, 2.0, PARAMS, ROOM, np.random.default_rng(0))
    assert out.phase is Phase.PAUSED
    assert out.position == pytest.approx([2.0, 1.0])


def test_long_dt_matches_substepping():
    s = UserState([1.0, 1.0], [2.0, 1.0], 0.5)
    params = MobilityParams(0.2, 1.0, 0.5, 1.0)
    whole = mob.rwp_step(s, 5.0, params, ROOM, np.random.default_rng(11))
    g = np.random.default_rng(11)
    cur = s
    for _ in range(1000):
        cur = mob.rwp_step(cur, 5.0 / 1000, params, ROOM, g)
    assert whole.phase is Phase.MOVING  # pause then a new leg
    assert np.allclose(whole.position, cur.position, atol=1e-6)
    assert np.allclose(whole.waypoint, cur.waypoint)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.integers(0, 2**31))
def test_step_additivity(a, b, seed):
    s = mob.rwp_init(ROOM, MobilityParams(0.1, 1.0, 0.0, 1.0), 1, rng_seed=seed)[0]
    g1 = np.random.default_rng(seed)
    g2 = copy.deepcopy(g1)
    split = mob.rwp_step(mob.rwp_step(s, a, PARAMS, ROOM, g1), b, PARAMS, ROOM, g1)
    joint = mob.rwp_step(s, a + b, PARAMS, ROOM, g2)
    assert np.allclose(split.position, joint.position, atol=1e-9)
    assert ROOM.contains(split.position)


def test_predict_examples():
    p = mob.predict([1.0, 1.0], [1.0, 1.0], 0.3, 3)
    assert p.shape == (3, 2) and np.all(p == [1.0, 1.0])
    # straight mover, no stop: exact
    s = UserState([1.0, 1.0], [7.0, 1.0], 1.0)
    g = np.random.default_rng(0)
    truth = mob.trajectory([s], 5, 0.3, PARAMS, ROOM, seed=0)[:, 0]
    pred = mob.predict(truth[0], truth[1], 0.3, 3, ROOM)
    np.testing.assert_allclose(pred, truth[2:5], atol=1e-12)
    # clamped to the room
    assert np.all(mob.predict([7.5, 2.0], [7.9, 2.0], 0.3, 3, ROOM)[:, 0] <= 8.0)
    with pytest.raises(ValueError):
        mob.predict([0, 0], [1, 1], 0.3, 0)


def test_pausing_mover_is_mispredicted():
    s = UserState([1.0, 1.0], [1.3, 1.0], 1.0)  # reaches the waypoint at t = 0.3
    params = MobilityParams(0.1, 1.0, 0.5, 1.0)
    truth = mob.trajectory([s], 4, 0.3, params, ROOM, seed=1)[:, 0]
    pred = mob.predict([0.7, 1.0], truth[0], 0.3, 2, ROOM)
    assert np.allclose(pred[0], truth[1])
    assert not np.allclose(pred[1], truth[2])


def test_misprediction_probability_examples():
    s = UserState([0.0, 0.0], [2.0, 0.0], 0.5)
    assert mob.misprediction_probability(s, 2, 0.3) == pytest.approx(0.15)
    assert mob.misprediction_probability(UserState([0, 0], [0.1, 0], 1.0), 1, 0.3) == 1.0
    assert mob.misprediction_probability(s, 1, 1e-12) == pytest.approx(0.0, abs=1e-11)
    paused = UserState([1, 1], [1, 1], 0.5, 0.3, Phase.PAUSED)
    assert mob.misprediction_probability(paused, 1, 0.3) == 1.0


def test_expected_leg_length():
    unit = mob.expected_leg_length(Room(1.0, 1.0), 1_000_000, rng_seed=0)
    assert unit == pytest.approx(0.52141, abs=0.002)
    a = mob.expected_leg_length(Room(1.0, 0.5), 200_000, rng_seed=3)
    b = mob.expected_leg_length(Room(3.0, 1.5), 200_000, rng_seed=3)
    assert b == pytest.approx(3 * a, rel=1e-12)
    with pytest.raises(ValueError):
        mob.expected_leg_length(Room(1.0, 1.0), 0)


def test_service_time_bound_examples():
    assert mob.service_time_bound(0.1, 3, 0.1, 1.0, 3.0) == pytest.approx(0.2558, abs=1e-4)
    assert mob.service_time_bound(0.1, 3, 0.1, 1.0, 3.0) == pytest.approx(0.1 / 3 * math.log(10) / 0.9 * 3, rel=1e-14)
    v = 0.4
    assert mob.service_time_bound(0.5, 1, v, v * math.e, 2.0) == pytest.approx(1 / (v * math.e - v), rel=1e-14)
    t1 = mob.service_time_bound(0.1, 2, 0.1, 1.0, 3.0)
    assert mob.service_time_bound(0.1, 4, 0.1, 1.0, 3.0) == pytest.approx(t1 / 2)
    with pytest.raises(ValueError):
        mob.service_time_bound(0.1, 3, 0.0, 1.0, 3.0)


def test_misprediction_frequency_below_relaxed_delta():
    unit = Room(1.0, 1.0)
    params = MobilityParams(0.1, 1.0, 0.0, 1.0)
    tau = mob.service_time_bound(0.1, 3, 0.1, 1.0, 0.52141)
    assert mob.misprediction_frequency(unit, params, 3, tau, 20_000, rng_seed=2) <= 0.13


def test_trajectory_inside_and_deterministic():
    states = mob.rwp_init(ROOM, PARAMS, 4, rng_seed=0)
    a = mob.trajectory(states, 50, 0.3, PARAMS, ROOM, seed=9)
    b = mob.trajectory(states, 50, 0.3, PARAMS, ROOM, seed=9)
    assert a.shape == (50, 4, 2)
    assert np.array_equal(a, b)
    assert ROOM.contains(a)
    np.testing.assert_array_equal(a[0], [s.position for s in states])
