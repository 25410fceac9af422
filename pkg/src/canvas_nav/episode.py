"""Episode state machine: the per-tick act/advance loop with hindsight
trajectory bookkeeping.

Each policy tick converts a 4-waypoint ego-frame action into world targets,
runs the PD controller in closed loop, appends the achieved end-of-action
position to the hindsight trajectory, and checks the terminal conditions.
Collisions are logged but (by default) do not terminate the episode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .control import PDGains, TrackResult, track_waypoints
from .errors import ContractViolation
from .geometry import Point2, Polyline, Pose2, from_ego_frame
from .sim import CollisionTracker, RobotState, SimConfig
from .world import OccupancyGrid


class EpisodeStatus(str, Enum):
    Running = "running"
    Success = "success"
    Timeout = "timeout"


@dataclass
class EpisodeState:
    datapoint_id: str
    robot: RobotState
    goal: Point2
    t_max: int
    hindsight: Polyline = None          # H(t): achieved end-of-action positions
    collision_events: list = field(default_factory=list)
    status: EpisodeStatus = EpisodeStatus.Running
    tick: int = 0
    trace_points: list = field(default_factory=list)   # full dt-granularity path
    trace_times: list = field(default_factory=list)
    tick_records: list = field(default_factory=list)   # JSON-able per-tick log rows
    _tracker: CollisionTracker = None

    def executed_trace(self):
        """(times, (N,2) points) of the whole episode at dt granularity."""
        return np.array(self.trace_times), np.array(self.trace_points)


def start_episode(datapoint_id: str, start_pose: Pose2, goal: Point2,
                  sketch_length: float, cfg: SimConfig) -> EpisodeState:
    ep = EpisodeState(
        datapoint_id=datapoint_id,
        robot=RobotState(start_pose),
        goal=goal,
        t_max=cfg.t_max_for(sketch_length),
        hindsight=Polyline([(start_pose.x, start_pose.y)]),
        _tracker=CollisionTracker(cfg.collision_debounce),
    )
    ep.trace_points.append((start_pose.x, start_pose.y))
    ep.trace_times.append(0.0)
    return ep


def check_success(ep: EpisodeState, goal: Point2, cfg: SimConfig = SimConfig()) -> bool:
    """True iff the robot is within goal_radius of the goal."""
    return ep.robot.position.distance_to(goal) <= cfg.goal_radius


def advance_episode(ep: EpisodeState, world: OccupancyGrid, action_waypoints_ego,
                    gains: PDGains, cfg: SimConfig,
                    budget: Optional[float] = None) -> EpisodeState:
    """Execute one policy action (exactly 4 ego-frame waypoints) in closed
    loop and update hindsight/trace/status in place.

    The appended hindsight point is the ACHIEVED position, not the predicted
    4th waypoint. Collision events are debounced across the whole episode.
    """
    if ep.status is not EpisodeStatus.Running:
        raise ContractViolation(f"episode is {ep.status.value}, not running")
    waypoints = list(action_waypoints_ego)
    if len(waypoints) != cfg.action_horizon:
        raise ContractViolation(f"expected {cfg.action_horizon} waypoints, got {len(waypoints)}")
    pose = ep.robot.pose
    targets = [from_ego_frame(pose, Point2(float(w[0]), float(w[1])) if not isinstance(w, Point2) else w)
               for w in waypoints]
    budget = cfg.controller_budget if budget is None else budget
    result: TrackResult = track_waypoints(ep.robot, targets, gains, world, budget, cfg, tracker=ep._tracker)

    ep.robot = result.state
    if result.steps > 0:
        ep.trace_points.extend((float(x), float(y)) for x, y in result.trace.pts[1:])
        ep.trace_times.extend(float(t) for t in result.trace_times[1:])
    ep.collision_events.extend(result.collisions)
    ep.hindsight.append(ep.robot.position)
    ep.tick += 1

    if cfg.terminal_collision and ep.collision_events:
        ep.status = EpisodeStatus.Timeout
    elif check_success(ep, ep.goal, cfg):
        ep.status = EpisodeStatus.Success
    elif ep.tick >= ep.t_max:
        ep.status = EpisodeStatus.Timeout

    ep.tick_records.append({
        "tick": ep.tick,
        "pose": [ep.robot.pose.x, ep.robot.pose.y, ep.robot.pose.heading],
        "action_waypoints_world": [[t.x, t.y] for t in targets],
        "collisions": len(ep.collision_events),
        "status": ep.status.value,
    })
    return ep


def episode_log_lines(ep: EpisodeState) -> list:
    """One JSON line per completed tick."""
    return [json.dumps(rec, sort_keys=True) for rec in ep.tick_records]
