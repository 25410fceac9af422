"""Datapoint schema, persistence, condition-aware sketch generation, FD
annotation, and teleoperation recording.

Files are schema-versioned JSON with sorted keys and 6-significant-digit
floats so fixtures stay byte-stable. A datapoint's condition label is
validated against the map geometry at save time: a Misleading sketch must
clip at least one blocking cell, a Precise one must clip none.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ConditionMismatch,
    GenerationFailed,
    MissingDemo,
    SchemaError,
    SessionAborted,
)
from .geometry import Point2, Polyline, Pose2, polyline_length
from .metrics import frechet_resampled

FD_RESOLUTION = 0.1  # densify curves to this spacing before measuring FD
from .sim import CollisionTracker, RobotState, SimConfig, step_kinematics
from .world import OccupancyGrid, is_blocked, load_map, sketch_blocking_segments

log = logging.getLogger(__name__)

SCHEMA_VERSION = 2
PRECISE = "precise"
MISLEADING = "misleading"


def round_sig(x: float, digits: int = 6) -> float:
    if x == 0 or not math.isfinite(x):
        return float(x)
    return float(f"{x:.{digits}g}")


def _round_nested(obj):
    if isinstance(obj, float):
        return round_sig(obj)
    if isinstance(obj, (list, tuple)):
        return [_round_nested(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _round_nested(v) for k, v in obj.items()}
    return obj


def stable_json(obj) -> str:
    """Sorted keys, 6-sig-digit floats, trailing newline."""
    return json.dumps(_round_nested(obj), sort_keys=True, indent=1) + "\n"


def stable_json_line(obj) -> str:
    """Single-line variant for JSONL streams."""
    return json.dumps(_round_nested(obj), sort_keys=True, separators=(",", ": "))


def atomic_write(path: Path, data: str) -> None:
    """Write-temp-then-rename so crashes never corrupt the dataset dir."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


@dataclass
class Datapoint:
    id: str
    environment: str
    map_ref: str                      # path to map.pgm relative to the datapoint file
    sketch: Polyline
    language: str
    condition: str                    # "precise" | "misleading"
    goal: Point2
    start_pose: Pose2
    constraints: list = field(default_factory=list)
    demo: Optional[Polyline] = None
    demo_duration: Optional[float] = None
    fd_sketch_demo: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "environment": self.environment,
            "map_ref": self.map_ref,
            "sketch": self.sketch.tolist(),
            "language": self.language,
            "condition": self.condition,
            "constraints": list(self.constraints),
            "goal": [self.goal.x, self.goal.y],
            "start_pose": [self.start_pose.x, self.start_pose.y, self.start_pose.heading],
            "demo": self.demo.tolist() if self.demo is not None else None,
            "demo_duration": self.demo_duration,
            "fd_sketch_demo": self.fd_sketch_demo,
        }


def _require(data: dict, key: str, types) -> object:
    if key not in data:
        raise SchemaError(key, "missing field")
    value = data[key]
    if not isinstance(value, types):
        raise SchemaError(key, f"expected {types}, got {type(value).__name__}")
    return value


def _parse_polyline(raw, fieldname: str) -> Polyline:
    try:
        return Polyline(raw)
    except Exception as e:
        raise SchemaError(fieldname, str(e)) from None


def datapoint_from_dict(data: dict) -> Datapoint:
    if not isinstance(data, dict):
        raise SchemaError("$", "datapoint must be a JSON object")
    version = data.get("schema_version", 1)
    if version not in (1, SCHEMA_VERSION):
        raise SchemaError("schema_version", f"unsupported version {version}")
    if version == 1:
        # v1 predates constraints and demo_duration; fill defaults.
        data = dict(data)
        data.setdefault("constraints", [])
        data.setdefault("demo_duration", None)
        log.info("migrated v1 datapoint %s with defaults (constraints=[], demo_duration=None)",
                 data.get("id", "?"))
    dp_id = _require(data, "id", str)
    env = _require(data, "environment", str)
    map_ref = _require(data, "map_ref", str)
    sketch = _parse_polyline(_require(data, "sketch", list), "sketch")
    language = _require(data, "language", str)
    condition = _require(data, "condition", str)
    if condition not in (PRECISE, MISLEADING):
        raise SchemaError("condition", f"must be '{PRECISE}' or '{MISLEADING}'")
    constraints = _require(data, "constraints", list)
    goal_raw = _require(data, "goal", list)
    if len(goal_raw) != 2:
        raise SchemaError("goal", "expected [x, y]")
    pose_raw = _require(data, "start_pose", list)
    if len(pose_raw) != 3:
        raise SchemaError("start_pose", "expected [x, y, heading]")
    demo = None
    if data.get("demo") is not None:
        demo = _parse_polyline(data["demo"], "demo")
    duration = data.get("demo_duration")
    fd = data.get("fd_sketch_demo")
    if fd is not None and demo is None:
        raise SchemaError("fd_sketch_demo", "present without a demo")
    return Datapoint(
        id=dp_id, environment=env, map_ref=map_ref, sketch=sketch,
        language=language, condition=condition,
        constraints=[str(c) for c in constraints],
        goal=Point2(float(goal_raw[0]), float(goal_raw[1])),
        start_pose=Pose2(float(pose_raw[0]), float(pose_raw[1]), float(pose_raw[2])),
        demo=demo,
        demo_duration=float(duration) if duration is not None else None,
        fd_sketch_demo=float(fd) if fd is not None else None,
    )


def validate_condition(dp: Datapoint, grid: OccupancyGrid) -> None:
    """Enforce the condition/geometry invariant; raises ConditionMismatch
    with the offending segment index."""
    hits = sketch_blocking_segments(grid, dp.sketch)
    if dp.condition == PRECISE and hits:
        raise ConditionMismatch(
            f"precise sketch of {dp.id!r} clips a blocking cell at segment {hits[0]}",
            segment_index=hits[0])
    if dp.condition == MISLEADING and not hits:
        raise ConditionMismatch(
            f"misleading sketch of {dp.id!r} does not clip any blocking cell",
            segment_index=-1)


def save_datapoint(dp: Datapoint, path, grid: Optional[OccupancyGrid] = None) -> None:
    """Persist as stable JSON; validates the condition invariant when the
    grid is supplied (callers inside a dataset always have it)."""
    if grid is not None:
        validate_condition(dp, grid)
    atomic_write(Path(path), stable_json(dp.to_dict()))


def load_datapoint(path) -> Datapoint:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"invalid JSON: {e}") from None
    return datapoint_from_dict(data)


def load_dataset_map(dataset_dir):
    """(grid, regions) for a dataset environment directory."""
    dataset_dir = Path(dataset_dir)
    return load_map((dataset_dir / "map.pgm").read_bytes(),
                    (dataset_dir / "map.json").read_bytes())


def iter_datapoints(dataset_dir):
    dp_dir = Path(dataset_dir) / "datapoints"
    if not dp_dir.is_dir():
        return
    for path in sorted(dp_dir.glob("dp_*.json")):
        yield load_datapoint(path)


def annotate_fd(dp: Datapoint) -> Datapoint:
    """Fill fd_sketch_demo with the Fréchet distance between the sketch and
    the demonstrated trajectory (both densified to 0.1 m so the discrete DP
    tracks the continuous distance within one sample)."""
    if dp.demo is None:
        raise MissingDemo(f"datapoint {dp.id!r} has no demo")
    return replace(dp, fd_sketch_demo=frechet_resampled(dp.sketch, dp.demo, FD_RESOLUTION))


def make_misleading(grid: OccupancyGrid, precise_sketch: Polyline, seed: int,
                    sigma_step: float = 0.5, sigma_max: float = 10.0) -> Polyline:
    """Perturb interior control points with growing Gaussian noise until the
    sketch clips a blocking cell. Endpoints stay fixed; deterministic per
    seed. Raises GenerationFailed once sigma exceeds sigma_max."""
    if sketch_blocking_segments(grid, precise_sketch):
        raise ConditionMismatch("input sketch must be blocking-free")
    if len(precise_sketch) < 3:
        # no interior points to perturb: insert midpoints first
        pts = precise_sketch.pts
        mids = (pts[:-1] + pts[1:]) / 2
        merged = np.empty((len(pts) + len(mids), 2))
        merged[0::2] = pts
        merged[1::2] = mids
        precise_sketch = Polyline(merged)
    rng = np.random.default_rng(seed)
    base = precise_sketch.pts
    sigma = sigma_step
    while sigma <= sigma_max + 1e-9:
        for _ in range(8):  # a few draws per noise level
            noisy = base.copy()
            noise = rng.normal(0.0, sigma, (len(base) - 2, 2))
            noisy[1:-1] += noise
            candidate = Polyline(noisy)
            if sketch_blocking_segments(grid, candidate):
                return candidate
        sigma += sigma_step
    raise GenerationFailed(f"no blocking cell reachable within sigma <= {sigma_max} m")


# ---------------------------------------------------------------------------
# Teleoperation recording


@dataclass
class TeleopRecord:
    samples: list = field(default_factory=list)   # (time, Pose2, v_cmd, w_cmd)
    duration: float = 0.0
    incomplete: bool = False
    degenerate: bool = False

    def pose_track(self) -> Polyline:
        if not self.samples:
            raise MissingDemo("empty teleop record")
        return Polyline([(s[1].x, s[1].y) for s in self.samples])


class TeleopSession:
    """Fixed-rate (10 Hz) simulation fed by timestamped velocity commands.

    Zero-order hold on the latest command with a 0.5 s watchdog: the robot
    auto-zeros when commands go silent. Deterministic for a given command
    log, so replayed sessions reproduce demos exactly.
    """

    RATE_HZ = 10.0
    WATCHDOG_S = 0.5

    def __init__(self, world: OccupancyGrid, start_pose: Pose2, cfg: SimConfig = SimConfig()):
        self.world = world
        self.cfg = cfg
        self.state = RobotState(start_pose)
        self.record = TeleopRecord()
        self.tracker = CollisionTracker(cfg.collision_debounce)
        self._cmd = (0.0, 0.0)
        self._cmd_time: Optional[float] = None
        self._last_cmd_stamp = -math.inf
        self.record.samples.append((0.0, start_pose, 0.0, 0.0))

    @property
    def time(self) -> float:
        return self.state.time

    def command(self, v: float, omega: float, t: Optional[float] = None) -> None:
        """Accept a velocity command stamped at time t (defaults to now).
        Stamps must be monotone; stale stamps are ignored."""
        stamp = self.time if t is None else float(t)
        if stamp < self._last_cmd_stamp:
            return
        self._last_cmd_stamp = stamp
        self._cmd = (float(v), float(omega))
        self._cmd_time = stamp

    def tick(self) -> None:
        """One 1/RATE_HZ step with hold + watchdog semantics."""
        dt = 1.0 / self.RATE_HZ
        v, w = self._cmd
        if self._cmd_time is None or (self.time - self._cmd_time) >= self.WATCHDOG_S - 1e-9:
            v, w = 0.0, 0.0
        cand = step_kinematics(self.state, v, w, dt, self.cfg)
        blocked = is_blocked(self.world, cand.position, self.cfg.footprint_radius)
        if blocked:
            cand = step_kinematics(self.state, 0.0, w, dt, self.cfg)
        self.tracker.update(blocked, cand.time, self.state.position)
        self.state = cand
        self.record.samples.append((self.state.time, self.state.pose, v, w))

    def step_to(self, t: float) -> None:
        while self.time + 1.0 / self.RATE_HZ <= t + 1e-9:
            self.tick()

    def finalize(self, aborted: bool = False) -> TeleopRecord:
        self.record.duration = self.time
        self.record.incomplete = aborted
        track = self.record.pose_track()
        self.record.degenerate = len(track) < 2 or polyline_length(track) < 0.01
        return self.record


def record_teleop(commands, world: OccupancyGrid, dp: Datapoint,
                  cfg: SimConfig = SimConfig()) -> tuple:
    """Run a scripted command stream [(t, v, omega), ...] through a session
    and return (record, datapoint-with-demo, annotated FD).

    Command timestamps must be non-decreasing; the session steps at 10 Hz
    between them and for one watchdog interval after the last command.
    """
    session = TeleopSession(world, dp.start_pose, cfg)
    last_t = 0.0
    try:
        for t, v, w in commands:
            if t < last_t:
                raise SessionAborted(f"command stamp {t} went backwards")
            session.step_to(t)
            session.command(v, w, t)
            last_t = t
        session.step_to(last_t + TeleopSession.WATCHDOG_S)
    except SessionAborted:
        record = session.finalize(aborted=True)
        raise
    record = session.finalize()
    demo = record.pose_track()
    out = replace(dp, demo=demo, demo_duration=record.duration)
    if not record.degenerate:
        out = annotate_fd(out)
    else:
        log.warning("teleop session for %s produced a degenerate demo", dp.id)
    return record, out
