"""PD controller turning world-frame waypoints into (v, omega) commands.

The proportional term steers toward the bearing error; the derivative term
damps heading oscillation; forward speed scales with distance and is
suppressed (cos gating, no reverse) while the target is behind the robot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .geometry import Point2, Polyline, bearing, normalize_angle
from .sim import CollisionTracker, RobotState, SimConfig, clamp, step_kinematics
from .world import OccupancyGrid, is_blocked


@dataclass(frozen=True)
class PDGains:
    kp_lin: float = 1.0
    kp_ang: float = 2.0
    kd_ang: float = 0.5
    v_max: float = 1.5
    omega_max: float = 1.5
    accept_radius: float = 0.15

    def __post_init__(self):
        if min(self.kp_lin, self.kp_ang, self.kd_ang, self.v_max, self.omega_max, self.accept_radius) <= 0:
            raise ValueError("all gains and limits must be positive")
        if self.accept_radius >= 1.0:
            raise ValueError("accept_radius must be < 1 m")

    def to_dict(self) -> dict:
        return {"kp_lin": self.kp_lin, "kp_ang": self.kp_ang, "kd_ang": self.kd_ang,
                "v_max": self.v_max, "omega_max": self.omega_max,
                "accept_radius": self.accept_radius}


def control_step(pose, target: Point2, gains: PDGains, prev_heading_error: float, dt: float):
    """One PD update toward a world-frame target.

    Returns (v, omega, heading_error); heading_error feeds the next call's
    derivative term. Discontinuous only at the -pi/pi wrap of the error.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    dist = math.hypot(target.x - pose.x, target.y - pose.y)
    e = normalize_angle(bearing(pose.position, target) - pose.heading)
    omega = clamp(gains.kp_ang * e + gains.kd_ang * (e - prev_heading_error) / dt,
                  -gains.omega_max, gains.omega_max)
    v = clamp(gains.kp_lin * dist * max(0.0, math.cos(e)), 0.0, gains.v_max)
    return v, omega, e


@dataclass
class TrackResult:
    state: RobotState
    trace: Polyline                      # pose positions at dt granularity, start included
    trace_times: np.ndarray
    collisions: list                     # (time, Point2) new events from this run
    reached: bool
    steps: int


def track_waypoints(start: RobotState, targets, gains: PDGains, world: OccupancyGrid,
                    budget: float, cfg: SimConfig = SimConfig(),
                    tracker: CollisionTracker | None = None) -> TrackResult:
    """Drive through exactly 4 world-frame targets in order, switching when
    within accept_radius, until the last is reached or the budget expires.

    Steps the kinematics at cfg.dt. A step whose end position would be
    blocked is re-run with zero linear velocity (rotation still applies) and
    logged through the collision tracker. Returns the full dt-granularity
    trace; the caller's tracker (if given) accumulates events across calls.
    """
    targets = list(targets)
    if len(targets) != cfg.action_horizon:
        raise ContractViolation(f"expected {cfg.action_horizon} waypoints, got {len(targets)}")
    if budget <= 0:
        raise ValueError("budget must be > 0")
    own_tracker = tracker if tracker is not None else CollisionTracker(cfg.collision_debounce)
    new_events_from = len(own_tracker.events)

    state = start
    pts = [(state.pose.x, state.pose.y)]
    times = [state.time]
    idx = 0
    prev_e = 0.0
    steps = 0
    max_steps = int(round(budget / cfg.dt))
    reached = False
    while steps < max_steps:
        # Switch through any targets already satisfied at this pose.
        while idx < len(targets) and state.position.distance_to(targets[idx]) <= gains.accept_radius:
            idx += 1
        if idx >= len(targets):
            reached = True
            break
        v, w, prev_e = control_step(state.pose, targets[idx], gains, prev_e, cfg.dt)
        cand = step_kinematics(state, v, w, cfg.dt, cfg)
        blocked = is_blocked(world, cand.position, cfg.footprint_radius)
        if blocked:
            # Wall contact: hold position, allow rotation only.
            cand = step_kinematics(state, 0.0, w, cfg.dt, cfg)
        own_tracker.update(blocked, cand.time, state.position)
        state = cand
        pts.append((state.pose.x, state.pose.y))
        times.append(state.time)
        steps += 1
    if not reached:
        while idx < len(targets) and state.position.distance_to(targets[idx]) <= gains.accept_radius:
            idx += 1
        reached = idx >= len(targets)
    return TrackResult(
        state=state,
        trace=Polyline(np.array(pts)),
        trace_times=np.array(times),
        collisions=own_tracker.events[new_events_from:],
        reached=reached,
        steps=steps,
    )
