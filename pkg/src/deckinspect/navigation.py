"""Potential-field tracking and omni-motion control laws.

The mobile robot follows a virtual robot that moves along the planned
trajectory. The attractive potential ``V = 0.5 * lam * |q_rv|^2`` pulls the
robot toward the virtual one, where ``q_rv = q_v - q_r``. Along scan lines the
robot is driven by a speed/heading pair (``linear_nav_command``); at lane ends a
decoupled PD loop moves it sideways to a safe waypoint without turning.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError

DEFAULT_LAMBDA = 0.05
DEFAULT_K_OFFSET = 0.1
# offsets below this are treated as coincident; their bearing is round-off noise
COINCIDENT_DISTANCE = 1e-9


def wrap_angle(angle: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidInputError(f"non-finite input: {v!r}")


def _check_lambda(lam: float) -> None:
    _check_finite(lam)
    if lam <= 0.0:
        raise InvalidInputError(f"attraction gain must be positive, got {lam}")


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        _check_finite(self.x, self.y, self.heading)
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Velocity2D:
    vx: float
    vy: float

    def __post_init__(self):
        _check_finite(self.vx, self.vy)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def direction(self) -> float:
        return math.atan2(self.vy, self.vx)


@dataclass(frozen=True)
class RelativeState:
    """Offset from robot to virtual robot and its bearing ``phi``."""

    q_rv: tuple[float, float]
    phi: float

    @property
    def distance(self) -> float:
        return math.hypot(*self.q_rv)


@dataclass(frozen=True)
class LinearNavCommand:
    v_d: float
    theta_d: float


@dataclass(frozen=True)
class PDGains:
    kp_x: float
    kd_x: float
    kp_y: float
    kd_y: float
    k_offset: float = DEFAULT_K_OFFSET

    def __post_init__(self):
        _check_finite(self.kp_x, self.kd_x, self.kp_y, self.kd_y, self.k_offset)
        if min(self.kp_x, self.kp_y) < 0.0:
            raise InvalidInputError("proportional gains must be nonnegative")
        if not 0.0 < self.k_offset < 1.0:
            raise InvalidInputError("k_offset must lie in (0, 1)")
        for kp, kd in ((self.kp_x, self.kd_x), (self.kp_y, self.kd_y)):
            if not math.isclose(kd, kp + self.k_offset, rel_tol=1e-12, abs_tol=1e-12):
                raise InvalidInputError("derivative gain must equal kp + k_offset")


@dataclass(frozen=True)
class ControllerParams:
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        _check_lambda(self.lam)


def attractive_potential(q_rv: Sequence[float], lam: float = DEFAULT_LAMBDA) -> float:
    x, y = float(q_rv[0]), float(q_rv[1])
    _check_finite(x, y)
    _check_lambda(lam)
    return 0.5 * lam * (x * x + y * y)


def desired_velocity(p_v: Velocity2D, q_rv: Sequence[float], lam: float = DEFAULT_LAMBDA) -> Velocity2D:
    """Velocity that makes the tracking error obey ``dq/dt = -lam * q``."""
    x, y = float(q_rv[0]), float(q_rv[1])
    _check_finite(x, y)
    _check_lambda(lam)
    return Velocity2D(p_v.vx + lam * x, p_v.vy + lam * y)


def relative_state(robot: Pose2D, virtual: Pose2D) -> RelativeState:
    """Bearing falls back to the virtual heading when the robots coincide."""
    dx = virtual.x - robot.x
    dy = virtual.y - robot.y
    if math.hypot(dx, dy) <= COINCIDENT_DISTANCE:
        phi = virtual.heading
    else:
        phi = math.atan2(dy, dx)
    return RelativeState((dx, dy), phi)


def linear_nav_command(
    robot: Pose2D,
    virtual: Pose2D,
    virtual_speed: float,
    lam: float = DEFAULT_LAMBDA,
) -> LinearNavCommand:
    """Speed and heading set-points for straight-line tracking.

    The commanded speed uses ``|cos(theta_v - phi)|`` so that it never falls
    below the virtual speed; the heading's arcsine is divided by that commanded
    speed, which keeps its argument inside [-1, 1].
    """
    _check_finite(virtual_speed)
    _check_lambda(lam)
    if virtual_speed < 0.0:
        raise InvalidInputError("virtual speed must be nonnegative")
    rel = relative_state(robot, virtual)
    dist = rel.distance
    delta = virtual.heading - rel.phi
    v_d = math.sqrt(
        virtual_speed**2
        + 2.0 * lam * dist * virtual_speed * abs(math.cos(delta))
        + (lam * dist) ** 2
    )
    if v_d == 0.0:
        return LinearNavCommand(0.0, wrap_angle(rel.phi))
    ratio = virtual_speed * math.sin(delta) / v_d
    ratio = max(-1.0, min(1.0, ratio))  # rounding only; |ratio| <= 1 analytically
    return LinearNavCommand(v_d, wrap_angle(rel.phi + math.asin(ratio)))


def linear_nav_batch(distance, delta, virtual_speed, lam: float = DEFAULT_LAMBDA):
    """Vectorised speed, unclamped arcsine argument and heading offset.

    ``delta`` is ``theta_v - phi``; the heading command is ``phi + offset``.
    Rows with zero commanded speed get argument 0.
    """
    _check_lambda(lam)
    d = np.asarray(distance, dtype=float)
    dl = np.asarray(delta, dtype=float)
    p = np.asarray(virtual_speed, dtype=float)
    v_d = np.sqrt(p**2 + 2.0 * lam * d * p * np.abs(np.cos(dl)) + (lam * d) ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(v_d > 0, p * np.sin(dl) / v_d, 0.0)
    return v_d, arg, np.arcsin(np.clip(arg, -1.0, 1.0))


def rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s], [-s, c]])


def omni_error(robot: Pose2D, safe_point: Sequence[float], phi: float) -> tuple[float, float]:
    _check_finite(phi, float(safe_point[0]), float(safe_point[1]))
    dx = float(safe_point[0]) - robot.x
    dy = float(safe_point[1]) - robot.y
    c, s = math.cos(phi), math.sin(phi)
    return (c * dx + s * dy, -s * dx + c * dy)


def pd_speed_command(
    e_now: Sequence[float], e_prev: Sequence[float], gains: PDGains
) -> tuple[float, float]:
    vx = gains.kp_x * e_now[0] + gains.kd_x * (e_now[0] - e_prev[0])
    vy = gains.kp_y * e_now[1] + gains.kd_y * (e_now[1] - e_prev[1])
    return (vx, vy)


def select_pd_gains(
    v_desired: Sequence[float],
    start: Pose2D | Sequence[float],
    safe_point: Sequence[float],
    k_offset: float = DEFAULT_K_OFFSET,
    min_displacement: float | None = None,
) -> PDGains:
    """Proportional gains that give the desired speed at the start point.

    With ``min_displacement=None`` a zero displacement on either axis raises
    :class:`DegenerateGeometryError`; otherwise the displacement is floored.
    """
    if isinstance(start, Pose2D):
        x0, y0 = start.x, start.y
    else:
        x0, y0 = float(start[0]), float(start[1])
    if not 0.0 < k_offset < 1.0:
        raise InvalidInputError("k_offset must lie in (0, 1)")
    gains = []
    for axis, vd, delta in (("x", v_desired[0], safe_point[0] - x0), ("y", v_desired[1], safe_point[1] - y0)):
        dist = abs(delta)
        if dist == 0.0 or (min_displacement is not None and dist < min_displacement):
            if min_displacement is None:
                raise DegenerateGeometryError(f"zero {axis} displacement between start and safe point")
            dist = min_displacement
        gains.append(abs(vd) / dist)
    kp_x, kp_y = gains
    return PDGains(kp_x, kp_x + k_offset, kp_y, kp_y + k_offset, k_offset)


def _linear_nav_velocity(robot_xy, virtual_xy, p_v, lam):
    heading_v = math.atan2(p_v[1], p_v[0]) if (p_v[0] or p_v[1]) else 0.0
    cmd = linear_nav_command(
        Pose2D(robot_xy[0], robot_xy[1]),
        Pose2D(virtual_xy[0], virtual_xy[1], heading_v),
        math.hypot(p_v[0], p_v[1]),
        lam,
    )
    return np.array([cmd.v_d * math.cos(cmd.theta_d), cmd.v_d * math.sin(cmd.theta_d)])


def rollout_tracking(
    q_rv0: Sequence[float],
    p_v: Sequence[float] = (0.0, 0.0),
    lam: float = DEFAULT_LAMBDA,
    t_end: float = 60.0,
    dt: float = 0.01,
    controller: str = "desired_velocity",
    integrator: str = "rk4",
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a robot chasing a constant-velocity virtual robot.

    Returns ``(times, q_rv)`` with ``q_rv`` of shape ``(n, 2)``. The robot
    starts at the origin and the virtual robot at ``q_rv0``.
    """
    _check_lambda(lam)
    if dt <= 0.0 or t_end < 0.0:
        raise InvalidInputError("dt must be positive and t_end nonnegative")
    pv = np.asarray(p_v, dtype=float)
    v0 = np.asarray(q_rv0, dtype=float)

    if controller == "desired_velocity":
        def robot_velocity(r, t):
            q = v0 + pv * t - r
            return pv + lam * q
    elif controller == "linear_nav":
        def robot_velocity(r, t):
            return _linear_nav_velocity(r, v0 + pv * t, pv, lam)
    else:
        raise InvalidInputError(f"unknown controller {controller!r}")

    step: Callable
    if integrator == "rk4":
        def step(r, t):
            k1 = robot_velocity(r, t)
            k2 = robot_velocity(r + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = robot_velocity(r + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = robot_velocity(r + dt * k3, t + dt)
            return r + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    elif integrator == "euler":
        def step(r, t):
            return r + dt * robot_velocity(r, t)
    else:
        raise InvalidInputError(f"unknown integrator {integrator!r}")

    n = int(round(t_end / dt))
    times = np.arange(n + 1) * dt
    q = np.empty((n + 1, 2))
    r = np.zeros(2)
    for i in range(n + 1):
        t = times[i]
        q[i] = v0 + pv * t - r
        if i < n:
            r = step(r, t)
    return times, q
