"""Differential-drive kinematics and simulation constants.

Integration uses the exact constant-twist solution (straight line or
circular arc), so results are invariant to splitting a step into substeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Point2, Pose2, normalize_angle


@dataclass(frozen=True)
class SimConfig:
    """Simulation constants shared by the episode loop, controller harness,
    and teleop service. Defaults sized for a ~1 m/s delivery robot on
    0.1 m/cell maps."""

    dt: float = 0.1
    v_max: float = 1.5
    omega_max: float = 1.5
    accept_radius: float = 0.15      # waypoint switch distance
    goal_radius: float = 1.0
    footprint_radius: float = 0.3
    terminal_collision: bool = False
    collision_debounce: float = 0.5  # free-space seconds before a new event
    controller_budget: float = 10.0  # seconds of sim time per policy tick
    action_spacing: float = 0.5      # meters between consecutive waypoints
    action_horizon: int = 4          # waypoints per action
    t_max_floor: int = 20
    t_max_safety: float = 3.0

    def t_max_for(self, sketch_length: float) -> int:
        """Tick budget scaled to task size."""
        horizon_m = self.action_spacing * self.action_horizon
        ticks = math.ceil(self.t_max_safety * sketch_length / (self.v_max * horizon_m))
        return max(self.t_max_floor, ticks)

    def to_dict(self) -> dict:
        return {
            "dt": self.dt, "v_max": self.v_max, "omega_max": self.omega_max,
            "accept_radius": self.accept_radius, "goal_radius": self.goal_radius,
            "footprint_radius": self.footprint_radius,
            "terminal_collision": self.terminal_collision,
            "collision_debounce": self.collision_debounce,
            "controller_budget": self.controller_budget,
            "action_spacing": self.action_spacing, "action_horizon": self.action_horizon,
            "t_max_floor": self.t_max_floor, "t_max_safety": self.t_max_safety,
        }


@dataclass(frozen=True)
class RobotState:
    pose: Pose2
    linear_velocity: float = 0.0
    angular_velocity: float = 0.0
    time: float = 0.0

    @property
    def position(self) -> Point2:
        return self.pose.position


def clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def step_kinematics(state: RobotState, v_cmd: float, omega_cmd: float, dt: float,
                    cfg: SimConfig = SimConfig()) -> RobotState:
    """Advance one step under clamped commands using the closed-form
    constant-twist solution. No reverse motion: v is clamped to [0, v_max]."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v = clamp(v_cmd, 0.0, cfg.v_max)
    w = clamp(omega_cmd, -cfg.omega_max, cfg.omega_max)
    h = state.pose.heading
    if abs(w) < 1e-9:
        x = state.pose.x + v * math.cos(h) * dt
        y = state.pose.y + v * math.sin(h) * dt
        h_new = h
    else:
        r = v / w
        h_new = h + w * dt
        x = state.pose.x + r * (math.sin(h_new) - math.sin(h))
        y = state.pose.y - r * (math.cos(h_new) - math.cos(h))
    return RobotState(Pose2(x, y, normalize_angle(h_new)), v, w, state.time + dt)


class CollisionTracker:
    """Debounces contact into discrete collision events.

    Consecutive blocked steps merge into one event; a new event requires the
    robot to have been back in free space for at least `debounce` seconds.
    """

    def __init__(self, debounce: float):
        self.debounce = debounce
        self._in_contact = False
        self._free_since: float | None = None
        self.events: list[tuple[float, Point2]] = []

    def update(self, blocked: bool, time: float, position: Point2) -> bool:
        """Feed one sim step; returns True when a new event was logged."""
        if blocked:
            new_event = not self._in_contact
            if new_event:
                self.events.append((time, position))
            self._in_contact = True
            self._free_since = None
            return new_event
        if self._in_contact:
            if self._free_since is None:
                self._free_since = time
            elif time - self._free_since >= self.debounce - 1e-9:
                self._in_contact = False
                self._free_since = None
        return False
