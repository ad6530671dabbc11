import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from deckinspect.errors import InvalidInputError, PlanningError, SimulationDivergedError
from deckinspect.mission import (
    FOOT,
    NON_STOP,
    STOP_MOVE,
    DeckSpec,
    NoiseModel,
    PoseLog,
    back_compute_dwell,
    coverage_distance,
    lane_count,
    plan_lawnmower,
    simulate_mission,
    stations_per_line,
    virtual_trajectory,
)
from deckinspect.navigation import Pose2D, rollout_tracking

import oracles

SPACING = 2 * FOOT


def test_full_deck_lanes_and_stations():
    plan = plan_lawnmower(DeckSpec(61.0, 6.1))
    assert plan.n_lanes == 3 == oracles.lane_count(6.1, FOOT, 6 * FOOT)
    assert stations_per_line(61.0, SPACING) == 101 == oracles.station_count(61.0, SPACING)
    assert len(plan.stations) == 303


def test_single_lane_deck():
    deck = DeckSpec(10.0, 2 * FOOT + 6 * FOOT)
    plan = plan_lawnmower(deck)
    assert plan.n_lanes == 1
    assert plan.scan_lines[0][0][1] == pytest.approx(deck.width / 2)
    assert plan.safe_waypoints == []


def test_too_narrow_deck():
    with pytest.raises(PlanningError):
        lane_count(DeckSpec(10.0, 1.5))


@pytest.mark.parametrize("kw", [dict(length=0, width=6), dict(length=5, width=-1), dict(length=5, width=0.5, curb_offset=0.3)])
def test_deck_validation(kw):
    with pytest.raises(InvalidInputError):
        DeckSpec(**kw)


@given(st.integers(1000, 80000), st.integers(2500, 20000))
def test_counts_match_enumeration(length_mm, width_mm):
    deck = DeckSpec(length_mm / 1000, width_mm / 1000)
    plan = plan_lawnmower(deck)
    n_lanes = oracles.lane_count(deck.width, deck.curb_offset, deck.scan_width, deck.lane_tolerance)
    assert plan.n_lanes == n_lanes
    assert len(plan.stations) == n_lanes * oracles.station_count(deck.length, SPACING)


@given(st.integers(1000, 40000), st.integers(2500, 15000))
def test_plan_geometry_invariants(length_mm, width_mm):
    deck = DeckSpec(length_mm / 1000, width_mm / 1000)
    plan = plan_lawnmower(deck)
    ys = [a[1] for a, _ in plan.scan_lines]
    # the lane-count tolerance lets separations exceed scan_width by at most that slack
    assert all(b - a <= deck.scan_width + deck.lane_tolerance for a, b in zip(ys, ys[1:]))
    for k, (a, b) in enumerate(plan.scan_lines):
        assert deck.curb_offset - 1e-9 <= a[1] <= deck.width - deck.curb_offset + 1e-9
        assert (b[0] - a[0] > 0) == (k % 2 == 0)
    for lane in range(plan.n_lanes):
        pts = np.array([(s.x, s.y) for s in plan.stations if s.scan_line == lane])
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        np.testing.assert_allclose(gaps, SPACING, atol=1e-6)


def test_coverage_grid():
    deck = DeckSpec(20.0, 6.1)
    plan = plan_lawnmower(deck)
    xs = np.arange(0.0, deck.length + 1e-9, 0.1)
    ys = np.arange(deck.curb_offset, deck.width - deck.curb_offset + 1e-9, 0.1)
    grid = [(x, y) for x in xs for y in ys]
    d = coverage_distance(plan, grid)
    # lanes may leave up to lane_tolerance uncovered, split over the two seams
    assert d.max() <= deck.scan_width / 2 + deck.lane_tolerance / 2
    # the whole deck sits within scan_width/2 + curb_offset of a line
    full = [(x, y) for x in xs for y in np.arange(0, deck.width + 1e-9, 0.1)]
    assert coverage_distance(plan, full).max() <= deck.scan_width / 2 + deck.curb_offset + 1e-9


def test_virtual_start_and_nonstop_end():
    plan = plan_lawnmower(DeckSpec(61.0, 2 * FOOT + 6 * FOOT), NON_STOP)
    v = virtual_trajectory(plan, 0.0)
    a, b = plan.scan_lines[0]
    assert (v.x, v.y) == pytest.approx(a)
    assert v.heading == pytest.approx(0.0)
    assert plan.nominal_duration == pytest.approx(122.0)
    end = virtual_trajectory(plan, 500.0)
    assert (end.x, end.y) == pytest.approx(b)
    assert end.speed == 0.0
    assert virtual_trajectory(plan, 61.0).speed == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        virtual_trajectory(plan, -1.0)


def test_stop_move_arrival_times():
    plan = plan_lawnmower(DeckSpec(12.0, 2 * FOOT + 6 * FOOT), STOP_MOVE, dwell_time=4.0)
    n = len(plan.stations)
    expected = oracles.stop_move_arrivals(n, SPACING, 0.5, 4.0)
    arrivals = [s.t0 for s in plan.segments if s.kind == "dwell"]
    np.testing.assert_allclose(arrivals, expected, atol=1e-9)
    np.testing.assert_allclose(arrivals, [k * (SPACING / 0.5 + 4) for k in range(n)], atol=1e-9)
    for t in arrivals:
        assert virtual_trajectory(plan, t + 2.0).speed == 0.0


def test_exponential_tracking_fit():
    lam = 0.05
    t, q = rollout_tracking((3.0, 4.0), p_v=(0.5, 0.0), lam=lam, t_end=3 / lam, dt=0.01, integrator="euler")
    norm = np.hypot(q[:, 0], q[:, 1])
    model = 5.0 * np.exp(-lam * t)
    r2 = 1 - np.sum((norm - model) ** 2) / np.sum((norm - norm.mean()) ** 2)
    assert r2 > 0.999


SMALL = DeckSpec(6.0, 6.1)


@pytest.fixture(scope="module")
def small_run():
    plan = plan_lawnmower(SMALL, STOP_MOVE)
    return plan, simulate_mission(plan, noise=NoiseModel(0.005, 0.002, seed=3))


def test_stop_move_captures_every_station(small_run):
    plan, res = small_run
    assert [s.index for s in res.stations] == list(range(len(plan.stations)))
    for st in res.stations:
        assert math.dist((st.pose.x, st.pose.y), st.planned) <= 0.05
        seg = plan.segments[[k for k, s in enumerate(plan.segments) if s.kind == "dwell" and s.station == st.index][0]]
        assert seg.station == st.index
    ts = [s.timestamp for s in res.stations]
    assert ts == sorted(ts)


def test_pose_log_time_increasing(small_run, tmp_path):
    _, res = small_run
    assert np.all(np.diff(res.log.column("time")) > 0)
    res.log.write_csv(tmp_path / "log.csv")
    back = PoseLog.read_csv(tmp_path / "log.csv")
    np.testing.assert_allclose(back.data, res.log.data, atol=1e-6)


def test_transition_holds_heading(small_run):
    plan, res = small_run
    assert len(res.transition_times) == plan.n_lanes - 1
    mode = res.log.mode
    heading = res.log.column("heading")
    edges = np.flatnonzero(np.diff(mode) != 0) + 1
    for start, stop in zip(edges[::2], edges[1::2]):
        seg = heading[start : stop + 1]
        change = np.abs(np.angle(np.exp(1j * (seg - seg[0]))))
        assert np.degrees(change.max()) < 1.0


def test_determinism():
    plan = plan_lawnmower(DeckSpec(4.0, 4.0), STOP_MOVE, dwell_time=1.0)
    a = simulate_mission(plan, noise=NoiseModel(0.01, 0.01, seed=9))
    b = simulate_mission(plan, noise=NoiseModel(0.01, 0.01, seed=9))
    assert a.log.data.tobytes() == b.log.data.tobytes()
    c = simulate_mission(plan, noise=NoiseModel(0.01, 0.01, seed=10))
    assert a.log.data.tobytes() != c.log.data.tobytes()


def test_matched_start_stays_on_virtual():
    plan = plan_lawnmower(DeckSpec(30.0, 2 * FOOT + 6 * FOOT), NON_STOP)
    res = simulate_mission(plan)
    assert np.nanmax(res.log.tracking_error) <= 1e-6


def test_steady_state_cross_track():
    deck = DeckSpec(61.0, 2 * FOOT + 6 * FOOT)
    plan = plan_lawnmower(deck, NON_STOP)
    y_line = plan.scan_lines[0][0][1]
    res = simulate_mission(plan, initial_pose=Pose2D(0.0, y_line + 0.3, 0.0))
    t = res.log.column("time")
    late = t > 90
    assert np.abs(res.log.column("y")[late] - y_line).max() < 0.01


def test_nonstop_records_all_stations():
    plan = plan_lawnmower(SMALL, NON_STOP)
    res = simulate_mission(plan)
    assert len(res.stations) == len(plan.stations)


def test_transition_timeout_raises():
    plan = plan_lawnmower(SMALL, NON_STOP)
    with pytest.raises(SimulationDivergedError):
        simulate_mission(plan, max_transition_time=1.0)


def test_bad_dt_and_noise():
    plan = plan_lawnmower(SMALL)
    with pytest.raises(InvalidInputError):
        simulate_mission(plan, dt=0.2)
    with pytest.raises(InvalidInputError):
        NoiseModel(-0.1)


def test_back_computed_dwell():
    plan = plan_lawnmower(DeckSpec(61.0, 6.1))
    dwell = back_compute_dwell(plan, 2400.0)
    again = plan_lawnmower(DeckSpec(61.0, 6.1), dwell_time=dwell)
    travel_transitions = sum(s.t1 - s.t0 for s in again.segments if s.kind == "transition")
    assert again.nominal_duration == pytest.approx(2400.0 + travel_transitions)
    with pytest.raises(PlanningError):
        back_compute_dwell(plan, 10.0)
