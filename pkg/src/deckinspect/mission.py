"""Lawnmower coverage plans and closed-loop survey simulation.

Deck frame: x runs along the bridge (0 at the start line), y across it (0 at
one curb). Scan lines run the full deck length at lane centres kept at least
``curb_offset + scan_width / 2`` from each curb. Between lanes the robot
shifts sideways with the omni PD loop, holding its heading.

The virtual robot follows a fixed schedule of move/dwell segments per lane.
Its clock is frozen while the robot performs a lane transition and restarts at
the beginning of the next lane.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, PlanningError, SimulationDivergedError
from .navigation import (
    ControllerParams,
    DEFAULT_K_OFFSET,
    Pose2D,
    linear_nav_command,
    omni_error,
    pd_speed_command,
    select_pd_gains,
    wrap_angle,
)

FOOT = 0.3048
NON_STOP, STOP_MOVE = "non-stop", "stop-move"
MODES = (NON_STOP, STOP_MOVE)


@dataclass(frozen=True)
class DeckSpec:
    length: float
    width: float
    curb_offset: float = FOOT
    scan_width: float = 6 * FOOT
    origin: tuple[float, float] = (0.0, 0.0)
    # accepted shortfall of lane coverage before another lane is added
    lane_tolerance: float = 0.01

    def __post_init__(self):
        for name in ("length", "width", "curb_offset", "scan_width", "lane_tolerance"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInputError(f"{name} must be finite")
        if self.length <= 0 or self.width <= 0:
            raise InvalidInputError("deck length and width must be positive")
        if self.curb_offset < 0 or self.lane_tolerance < 0:
            raise InvalidInputError("curb_offset and lane_tolerance must be nonnegative")
        if self.scan_width <= 0:
            raise InvalidInputError("scan_width must be positive")
        if 2 * self.curb_offset >= self.width:
            raise InvalidInputError("curb offsets leave no surveyable width")

    @property
    def surveyable_width(self) -> float:
        return self.width - 2 * self.curb_offset


@dataclass(frozen=True)
class Segment:
    kind: str  # "move", "dwell" or "transition"
    t0: float
    t1: float
    p0: tuple[float, float]
    p1: tuple[float, float]
    lane: int
    station: int | None = None

    @property
    def heading(self) -> float:
        return math.atan2(self.p1[1] - self.p0[1], self.p1[0] - self.p0[0])


@dataclass(frozen=True)
class PlannedStation:
    index: int
    scan_line: int
    x: float
    y: float
    heading: float


@dataclass
class MissionPlan:
    deck: DeckSpec
    scan_lines: list[tuple[tuple[float, float], tuple[float, float]]]
    safe_waypoints: list[tuple[float, float]]
    mode: str = STOP_MOVE
    station_spacing: float = 2 * FOOT
    cruise_speed: float = 0.5
    dwell_time: float = 4.5
    segments: list[Segment] = field(init=False, repr=False)
    stations: list[PlannedStation] = field(init=False, repr=False)
    lane_times: list[tuple[float, float]] = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.station_spacing > 0:
            raise InvalidInputError("station_spacing must be positive")
        if not self.cruise_speed > 0:
            raise InvalidInputError("cruise_speed must be positive")
        if self.dwell_time < 0:
            raise InvalidInputError("dwell_time must be nonnegative")
        if not self.scan_lines:
            raise InvalidInputError("plan has no scan lines")
        self._build_schedule()

    @property
    def n_lanes(self) -> int:
        return len(self.scan_lines)

    def transition(self, lane: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """Safe waypoint pair used to leave ``lane``."""
        return self.safe_waypoints[2 * lane], self.safe_waypoints[2 * lane + 1]

    def _build_schedule(self):
        segs: list[Segment] = []
        stations: list[PlannedStation] = []
        lane_times = []
        t = 0.0
        v = self.cruise_speed
        for lane, (a, b) in enumerate(self.scan_lines):
            a_arr, b_arr = np.asarray(a, float), np.asarray(b, float)
            length = float(np.linalg.norm(b_arr - a_arr))
            u = (b_arr - a_arr) / length
            heading = math.atan2(u[1], u[0])
            n_st = stations_per_line(length, self.station_spacing)
            pts = [tuple(a_arr + u * k * self.station_spacing) for k in range(n_st)]
            for p in pts:
                stations.append(PlannedStation(len(stations), lane, float(p[0]), float(p[1]), heading))
            t_lane = t
            first = len(stations) - n_st
            if self.mode == STOP_MOVE:
                for k, p in enumerate(pts):
                    segs.append(Segment("dwell", t, t + self.dwell_time, p, p, lane, first + k))
                    t += self.dwell_time
                    nxt = pts[k + 1] if k + 1 < n_st else tuple(b_arr)
                    dist = math.dist(p, nxt)
                    if dist > 1e-12:
                        segs.append(Segment("move", t, t + dist / v, p, nxt, lane))
                        t += dist / v
            else:
                segs.append(Segment("move", t, t + length / v, tuple(a_arr), tuple(b_arr), lane))
                t += length / v
            lane_times.append((t_lane, t))
            if lane + 1 < self.n_lanes:
                w0, w1 = self.transition(lane)
                dist = math.dist(w0, w1)
                segs.append(Segment("transition", t, t + dist / v, w0, w1, lane))
                t += dist / v
        self.segments = segs
        self.stations = stations
        self.lane_times = lane_times
        self._seg_starts = [s.t0 for s in segs]

    @property
    def nominal_duration(self) -> float:
        return self.segments[-1].t1

    def segment_at(self, t: float) -> Segment:
        k = bisect.bisect_right(self._seg_starts, t) - 1
        k = min(max(k, 0), len(self.segments) - 1)
        return self.segments[k]


def stations_per_line(length: float, spacing: float) -> int:
    return int(math.floor(length / spacing + 1e-9)) + 1


def lane_count(deck: DeckSpec) -> int:
    usable = deck.surveyable_width
    if usable + deck.lane_tolerance < deck.scan_width:
        raise PlanningError(
            f"surveyable width {usable:.4f} m is narrower than one {deck.scan_width:.4f} m lane"
        )
    return max(1, int(math.ceil((usable - deck.lane_tolerance) / deck.scan_width - 1e-9)))


def plan_lawnmower(
    deck: DeckSpec,
    mode: str = STOP_MOVE,
    cruise_speed: float = 0.5,
    station_spacing: float = 2 * FOOT,
    dwell_time: float = 4.5,
) -> MissionPlan:
    """Boustrophedon plan with lanes spread evenly across the surveyable width."""
    n = lane_count(deck)
    x0, y0 = deck.origin
    y_first = y0 + deck.curb_offset + deck.scan_width / 2
    y_last = y0 + deck.width - deck.curb_offset - deck.scan_width / 2
    if n == 1:
        ys = [0.5 * (y_first + y_last)]
    else:
        step = (y_last - y_first) / (n - 1)
        ys = [y_first + k * step for k in range(n)]
    lines = []
    for k, y in enumerate(ys):
        a, b = (x0, y), (x0 + deck.length, y)
        lines.append((a, b) if k % 2 == 0 else (b, a))
    waypoints = []
    for k in range(n - 1):
        waypoints.extend([lines[k][1], lines[k + 1][0]])
    return MissionPlan(deck, lines, waypoints, mode, station_spacing, cruise_speed, dwell_time)


@dataclass(frozen=True)
class VirtualState:
    x: float
    y: float
    vx: float
    vy: float
    heading: float
    segment: Segment

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


def virtual_trajectory(plan: MissionPlan, t: float) -> VirtualState:
    """Position, velocity and heading of the virtual robot at schedule time ``t``."""
    if t < 0:
        raise InvalidInputError("time must be nonnegative")
    seg = plan.segment_at(t)
    if seg.kind == "dwell" or t >= seg.t1:
        # dwelling, or clamped at the end of the mission
        p = seg.p0 if seg.kind == "dwell" else seg.p1
        heading = _lane_heading(plan, seg.lane) if seg.kind != "transition" else seg.heading
        return VirtualState(p[0], p[1], 0.0, 0.0, wrap_angle(heading), seg)
    frac = (t - seg.t0) / (seg.t1 - seg.t0)
    x = seg.p0[0] + frac * (seg.p1[0] - seg.p0[0])
    y = seg.p0[1] + frac * (seg.p1[1] - seg.p0[1])
    h = seg.heading
    v = plan.cruise_speed
    return VirtualState(x, y, v * math.cos(h), v * math.sin(h), wrap_angle(h), seg)


def _lane_heading(plan: MissionPlan, lane: int) -> float:
    a, b = plan.scan_lines[lane]
    return math.atan2(b[1] - a[1], b[0] - a[0])


@dataclass(frozen=True)
class NoiseModel:
    pose_sigma: float = 0.0
    heading_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.pose_sigma < 0 or self.heading_sigma < 0:
            raise InvalidInputError("noise sigmas must be nonnegative")


class _NoiseStream:
    def __init__(self, model: NoiseModel, block: int = 4096):
        self._rng = np.random.default_rng(model.seed)
        self._scale = np.array([model.pose_sigma, model.pose_sigma, model.heading_sigma])
        self._block = block
        self._buf = np.empty((0, 3))
        self._k = 0

    def __next__(self) -> np.ndarray:
        if self._k >= len(self._buf):
            self._buf = self._rng.standard_normal((self._block, 3)) * self._scale
            self._k = 0
        row = self._buf[self._k]
        self._k += 1
        return row


@dataclass(frozen=True)
class GainPolicy:
    k_offset: float = DEFAULT_K_OFFSET
    min_displacement: float = 0.01


@dataclass(frozen=True)
class Station:
    index: int
    pose: Pose2D
    timestamp: float
    scan_line: int
    true_pose: Pose2D
    planned: tuple[float, float]


POSE_LOG_COLUMNS = ("time", "x", "y", "heading", "est_x", "est_y", "est_heading", "cmd_v", "cmd_theta")


@dataclass
class PoseLog:
    """One row per integration step; omni commands are logged as speed and world direction."""

    data: np.ndarray  # (n, 9) in POSE_LOG_COLUMNS order
    mode: np.ndarray  # 0 = linear tracking, 1 = omni transition
    tracking_error: np.ndarray  # true |q_rv|, NaN during transitions

    def column(self, name: str) -> np.ndarray:
        return self.data[:, POSE_LOG_COLUMNS.index(name)]

    def __len__(self) -> int:
        return len(self.data)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(POSE_LOG_COLUMNS) + "\n")
            for row in self.data:
                fh.write(",".join(f"{v:.6f}" for v in row) + "\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> "PoseLog":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != POSE_LOG_COLUMNS:
            raise InvalidInputError("unexpected pose-log header")
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data, np.zeros(len(data), dtype=int), np.full(len(data), np.nan))


@dataclass
class SimulationResult:
    log: PoseLog
    stations: list[Station]
    duration: float
    transition_times: list[float]


def simulate_mission(
    plan: MissionPlan,
    params: ControllerParams = ControllerParams(),
    gains: GainPolicy = GainPolicy(),
    noise: NoiseModel = NoiseModel(),
    dt: float = 0.01,
    capture_radius: float = 0.05,
    arrival_tolerance: float = 0.02,
    initial_pose: Pose2D | None = None,
    max_transition_time: float = 300.0,
    divergence_window: float = 10.0,
    divergence_floor: float = 0.25,
) -> SimulationResult:
    """Drive a point robot through ``plan`` with explicit Euler steps.

    Along lanes the linear navigation law tracks the virtual robot; at lane
    ends the PD loop moves the robot to the next lane start in a frame rotated
    by the bearing to that point, fixed at activation. Controllers see the
    estimated pose (truth plus Gaussian noise); the truth integrates the
    commanded velocity exactly.
    """
    if not 0 < dt <= 0.1:
        raise InvalidInputError("dt must lie in (0, 0.1]")
    lam = params.lam
    noise_stream = _NoiseStream(noise)

    a0 = plan.scan_lines[0][0]
    if initial_pose is None:
        initial_pose = Pose2D(a0[0], a0[1], _lane_heading(plan, 0))
    pos = np.array([initial_pose.x, initial_pose.y])
    heading = initial_pose.heading

    by_lane: dict[int, list[PlannedStation]] = {}
    for st in plan.stations:
        by_lane.setdefault(st.scan_line, []).append(st)

    rows: list[tuple] = []
    modes: list[int] = []
    errors: list[float] = []
    captured: list[Station] = []
    transition_times: list[float] = []

    lane = 0
    lane_start_step = 0
    pending = 0  # next uncaptured station on this lane
    omni = False
    step = 0
    grow_time = 0.0
    prev_q = None
    target = phi = gains_now = e_prev = None
    omni_start = 0.0

    while True:
        t = step * dt
        n = next(noise_stream)
        est = Pose2D(pos[0] + n[0], pos[1] + n[1], heading + n[2])

        if omni:
            e = omni_error(est, target, phi)
            if math.hypot(*e) <= arrival_tolerance:
                transition_times.append(t - omni_start)
                omni = False
                lane += 1
                lane_start_step = step
                pending = 0
                prev_q = None
                grow_time = 0.0
            elif t - omni_start > max_transition_time:
                raise SimulationDivergedError(f"lane transition {lane} did not converge in {max_transition_time} s")

        if not omni:
            lane_t0, lane_t1 = plan.lane_times[lane]
            tau = lane_t0 + (step - lane_start_step) * dt
            vs = virtual_trajectory(plan, min(tau, lane_t1))
            cmd = linear_nav_command(est, Pose2D(vs.x, vs.y, vs.heading), vs.speed, lam)
            vel = (cmd.v_d * math.cos(cmd.theta_d), cmd.v_d * math.sin(cmd.theta_d))
            new_heading = cmd.theta_d
            cmd_v, cmd_theta = cmd.v_d, cmd.theta_d
            q_true = math.hypot(vs.x - pos[0], vs.y - pos[1])

            if prev_q is not None and q_true > prev_q:
                grow_time += dt
                if grow_time >= divergence_window and q_true > divergence_floor:
                    raise SimulationDivergedError(
                        f"tracking error grew for {grow_time:.1f} s to {q_true:.3f} m on lane {lane}"
                    )
            else:
                grow_time = 0.0
            prev_q = q_true

            lane_stations = by_lane.get(lane, [])
            if pending < len(lane_stations):
                st = lane_stations[pending]
                near = math.hypot(est.x - st.x, est.y - st.y) <= capture_radius
                dwelling = vs.segment.kind == "dwell" and vs.segment.station == st.index
                if near and (plan.mode == NON_STOP or dwelling):
                    captured.append(
                        Station(st.index, est, t, lane, Pose2D(pos[0], pos[1], heading), (st.x, st.y))
                    )
                    pending += 1
                elif plan.mode == STOP_MOVE and vs.segment.t0 > plan.segments[_dwell_index(plan, st.index)].t1:
                    pending += 1  # dwell window passed without capture

            stop = plan.scan_lines[lane][1]
            lane_done = tau >= lane_t1 and math.hypot(est.x - stop[0], est.y - stop[1]) <= capture_radius
            if lane_done and lane + 1 < plan.n_lanes:
                omni = True
                omni_start = t
                target = plan.transition(lane)[1]
                phi = math.atan2(target[1] - est.y, target[0] - est.x)
                e0 = omni_error(est, target, phi)
                gains_now = select_pd_gains(
                    (plan.cruise_speed, 0.0), (0.0, 0.0), e0, gains.k_offset, gains.min_displacement
                )
                e = e_prev = e0
            elif lane_done:
                rows.append((t, pos[0], pos[1], heading, est.x, est.y, est.heading, 0.0, 0.0))
                modes.append(0)
                errors.append(q_true)
                break

        if omni:
            # also runs on the activation step so the heading is held from the start
            vx_f, vy_f = pd_speed_command(e, e_prev, gains_now)
            e_prev = e
            c, s = math.cos(phi), math.sin(phi)
            vel = (c * vx_f - s * vy_f, s * vx_f + c * vy_f)
            new_heading = heading
            cmd_v, cmd_theta = math.hypot(*vel), math.atan2(vel[1], vel[0])
            q_true = float("nan")

        rows.append((t, pos[0], pos[1], heading, est.x, est.y, est.heading, cmd_v, cmd_theta))
        modes.append(1 if omni else 0)
        errors.append(q_true)
        pos = pos + dt * np.asarray(vel)
        heading = wrap_angle(new_heading)
        step += 1

    log = PoseLog(np.array(rows), np.array(modes), np.array(errors))
    return SimulationResult(log, captured, rows[-1][0], transition_times)


def _dwell_index(plan: MissionPlan, station_index: int) -> int:
    cache = plan.__dict__.setdefault("_dwell_cache", {})
    if not cache:
        for k, seg in enumerate(plan.segments):
            if seg.kind == "dwell":
                cache[seg.station] = k
    return cache[station_index]


def back_compute_dwell(plan: MissionPlan, target_duration: float, transition_allowance: float = 0.0) -> float:
    """Dwell per station that makes the nominal stop-move schedule last ``target_duration``."""
    travel = sum(math.dist(a, b) for a, b in plan.scan_lines) / plan.cruise_speed
    dwell = (target_duration - travel - transition_allowance) / len(plan.stations)
    if dwell < 0:
        raise PlanningError("target duration shorter than the travel time alone")
    return dwell


def coverage_distance(plan: MissionPlan, points: Sequence[tuple[float, float]]) -> np.ndarray:
    """Distance from each point to the nearest scan line."""
    pts = np.asarray(points, float)
    best = np.full(len(pts), np.inf)
    for a, b in plan.scan_lines:
        a, b = np.asarray(a, float), np.asarray(b, float)
        ab = b - a
        t = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
        d = np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)
        best = np.minimum(best, d)
    return best
