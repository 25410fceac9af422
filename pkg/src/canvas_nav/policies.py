"""Pluggable policies producing 4-waypoint actions: the rule-based planner
(sketch-following A*), the demonstration-replaying oracle, and the remote
learned-policy client.

Every policy returns exactly 4 ego-frame waypoints per tick; the shape is
enforced at one choke point (`Policy.act`).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .episode import EpisodeState
from .errors import ContractViolation, DegenerateInput, NoPath, ProtocolError, TokenOutOfRange
from .geometry import (
    Point2,
    Polyline,
    cumulative_arclength,
    point_at_arclength,
    polyline_length,
    resample_by_arclength,
    to_ego_frame_many,
)
from .sim import SimConfig
from .tokenizer import ACTION_HORIZON, ActionTokens, WaypointCodebook, decode
from .world import CellClass, OccupancyGrid, inflate

SUBGOAL_SPACING = 2.0
SUBGOAL_ACCEPT = 1.0
PLAN_MARGIN = 0.25  # extra inflation beyond the footprint for chord safety


@dataclass
class PolicyRequest:
    """The R(X_f, X_c, L) input tuple as it crosses the wire."""

    tick: int
    language: str
    front_view_png_b64: str
    canvas_png_b64: str
    codebook_k: int

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "language": self.language,
            "front_view_png_b64": self.front_view_png_b64,
            "canvas_png_b64": self.canvas_png_b64,
            "codebook_k": self.codebook_k,
        }


@dataclass
class PolicyResponse:
    """Either 4 waypoint tokens or 4 continuous ego waypoints."""

    tokens: Optional[ActionTokens] = None
    waypoints: Optional[np.ndarray] = None
    latency_s: Optional[float] = None

    def __post_init__(self):
        if (self.tokens is None) == (self.waypoints is None):
            raise ProtocolError("response must carry exactly one of tokens/waypoints")

    def resolve(self, cb: Optional[WaypointCodebook]) -> np.ndarray:
        """Continuous (4, 2) ego waypoints, decoding tokens if needed."""
        if self.waypoints is not None:
            return np.asarray(self.waypoints, dtype=float)
        if cb is None:
            raise ProtocolError("token response needs a codebook to decode")
        return np.array([decode(cb, t).as_array() for t in self.tokens])


@dataclass
class ActContext:
    """What a policy may look at when choosing its next action."""

    ep: EpisodeState
    world: OccupancyGrid
    sketch: Polyline
    language: str
    demo: Optional[Polyline] = None
    codebook: Optional[WaypointCodebook] = None
    render_fn: Optional[Callable[[], tuple]] = None   # lazy (front_b64, canvas_b64)


class Policy:
    """Base: subclasses implement _act(ctx) -> (4, 2) ego array."""

    name = "policy"
    wants_renders = False

    def reset(self, ctx_free_seed: int = 0) -> None:
        pass

    def act(self, ctx: ActContext) -> np.ndarray:
        waypoints = np.asarray(self._act(ctx), dtype=float)
        if waypoints.shape != (ACTION_HORIZON, 2):
            raise ContractViolation(f"policy produced shape {waypoints.shape}, need (4, 2)")
        return waypoints

    def _act(self, ctx: ActContext) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# A* on the occupancy grid


def astar_path(grid: OccupancyGrid, start: Point2, goal: Point2) -> Optional[Polyline]:
    """8-connected A* over blocking cells with a Euclidean heuristic.

    Ties break on (f, h, row-major index) so runs are deterministic. The
    start cell may be blocked (the robot can stand inside the inflation
    band); the goal cell may not. Returns cell-center world points or None.
    """
    if not (grid.in_bounds(start) and grid.in_bounds(goal)):
        return None
    blocked = grid.blocking_mask()
    sc, sr = grid.cell_of(start)
    gc, gr = grid.cell_of(goal)
    if blocked[gr, gc]:
        return None
    res = grid.resolution
    width = grid.width

    def h(c, r):
        return math.hypot(c - gc, r - gr) * res

    start_key = (sc, sr)
    g_score = {start_key: 0.0}
    open_heap = [(h(sc, sr), h(sc, sr), sr * width + sc, sc, sr)]
    came: dict = {}
    closed = set()
    neighbors = [(-1, -1, math.sqrt(2) * res), (0, -1, res), (1, -1, math.sqrt(2) * res),
                 (-1, 0, res), (1, 0, res),
                 (-1, 1, math.sqrt(2) * res), (0, 1, res), (1, 1, math.sqrt(2) * res)]
    while open_heap:
        f, _, _, c, r = heapq.heappop(open_heap)
        if (c, r) in closed:
            continue
        closed.add((c, r))
        if (c, r) == (gc, gr):
            cells = [(c, r)]
            while (c, r) in came:
                c, r = came[(c, r)]
                cells.append((c, r))
            cells.reverse()
            return Polyline([grid.cell_center(cc, rr).as_array() for cc, rr in cells])
        base = g_score[(c, r)]
        for dc, dr, cost in neighbors:
            nc, nr = c + dc, r + dr
            if not (0 <= nc < grid.width and 0 <= nr < grid.height):
                continue
            if blocked[nr, nc]:
                continue
            tentative = base + cost
            if tentative < g_score.get((nc, nr), math.inf):
                g_score[(nc, nr)] = tentative
                came[(nc, nr)] = (c, r)
                hh = h(nc, nr)
                heapq.heappush(open_heap, (tentative + hh, hh, nr * width + nc, nc, nr))
    return None


def _next_points_along(line: Polyline, from_s: float, spacing: float, count: int) -> np.ndarray:
    pts = [point_at_arclength(line, from_s + spacing * (i + 1)).as_array() for i in range(count)]
    return np.array(pts)


def _project_arclength(line: Polyline, p: Point2) -> float:
    """Arclength of the closest point on the polyline to p."""
    pts = line.pts
    cum = cumulative_arclength(line)
    best_d = math.inf
    best_s = 0.0
    for i in range(max(1, len(pts)) - 1):
        a = pts[i]
        b = pts[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else min(1.0, max(0.0, float(((p.as_array() - a) @ ab) / denom)))
        q = a + t * ab
        d = math.hypot(q[0] - p.x, q[1] - p.y)
        if d < best_d:
            best_d = d
            best_s = float(cum[i]) + t * math.dist(a, b)
    return best_s


class BaselinePolicy(Policy):
    """Rule-based point-to-point executive: the sketch becomes 2 m
    subgoals, A* (on the inflated grid) plans to the next unvisited one,
    and the first 4 path points at 0.5 m spacing are emitted.

    When A* fails (subgoal buried in an obstacle: the Misleading case) the
    policy falls back to the raw sketch points, blindly trusting the input.
    Language is ignored entirely. With `legacy_perception` the planner
    cannot tell Rock from Grass, reproducing the stumble-over-rocks failure.
    """

    name = "baseline"

    def __init__(self, cfg: SimConfig = SimConfig(), legacy_perception: bool = False,
                 subgoal_spacing: float = SUBGOAL_SPACING):
        self.cfg = cfg
        self.legacy_perception = legacy_perception
        self.subgoal_spacing = subgoal_spacing
        self._plan_grid: Optional[OccupancyGrid] = None
        self._subgoals: Optional[np.ndarray] = None
        self._subgoal_idx = 0
        self._sketch_progress = 0.0
        self.used_fallback = False

    def reset(self, ctx_free_seed: int = 0) -> None:
        self._plan_grid = None
        self._subgoals = None
        self._subgoal_idx = 0
        self._sketch_progress = 0.0
        self.used_fallback = False

    def _prepare(self, ctx: ActContext) -> None:
        grid = ctx.world
        if self.legacy_perception:
            cells = grid.cells.copy()
            cells[cells == int(CellClass.Rock)] = int(CellClass.Grass)
            grid = OccupancyGrid(grid.width, grid.height, grid.resolution, grid.origin, cells)
        self._plan_grid = inflate(grid, self.cfg.footprint_radius + PLAN_MARGIN)
        try:
            subgoals = resample_by_arclength(ctx.sketch, self.subgoal_spacing).pts[1:]
        except DegenerateInput:
            raise NoPath("sketch too degenerate to follow")
        self._subgoals = subgoals

    def _act(self, ctx: ActContext) -> np.ndarray:
        if self._plan_grid is None:
            self._prepare(ctx)
        pose = ctx.ep.robot.pose
        pos = pose.position
        while (self._subgoal_idx < len(self._subgoals) - 1 and
               pos.distance_to(Point2(*self._subgoals[self._subgoal_idx])) < SUBGOAL_ACCEPT):
            self._subgoal_idx += 1
        subgoal = Point2(*self._subgoals[self._subgoal_idx])
        at_last = self._subgoal_idx >= len(self._subgoals) - 1
        if at_last and pos.distance_to(subgoal) < SUBGOAL_ACCEPT:
            # arrived: hold position at the sketch end
            world_wps = np.repeat([[subgoal.x, subgoal.y]], ACTION_HORIZON, axis=0)
            return to_ego_frame_many(pose, world_wps)
        path = astar_path(self._plan_grid, pos, subgoal)
        if path is not None and len(path) >= 2:
            world_wps = _next_points_along(path, 0.0, self.cfg.action_spacing, ACTION_HORIZON)
        else:
            # Misleading case: trust the sketch verbatim.
            self.used_fallback = True
            s = max(self._sketch_progress, _project_arclength(ctx.sketch, pos))
            self._sketch_progress = s
            world_wps = _next_points_along(ctx.sketch, s, self.cfg.action_spacing, ACTION_HORIZON)
        return to_ego_frame_many(pose, world_wps)


class OraclePolicy(Policy):
    """Replays the human demonstration as an upper-bound policy: emits the
    next 4 demo waypoints (0.5 m spacing) ahead of the robot's projection
    onto the demo, with monotone progress. Past the demo end it repeats the
    final point (stop behavior). Emits tokens when built with a codebook,
    continuous waypoints otherwise."""

    name = "oracle"

    def __init__(self, cfg: SimConfig = SimConfig(), codebook: Optional[WaypointCodebook] = None):
        self.cfg = cfg
        self.codebook = codebook
        self._progress = 0.0

    def reset(self, ctx_free_seed: int = 0) -> None:
        self._progress = 0.0

    def respond(self, ctx: ActContext) -> PolicyResponse:
        if ctx.demo is None or len(ctx.demo) < 2:
            raise DegenerateInput("oracle needs a demonstration")
        pose = ctx.ep.robot.pose
        s = max(self._progress, _project_arclength(ctx.demo, pose.position))
        self._progress = s
        # Terminal deceleration: once the remaining demo fits inside the
        # goal radius plus one horizon, compress the spacing so this action
        # ends exactly at the demo end instead of stranding the episode's
        # success check partway into the goal annulus.
        horizon_m = self.cfg.action_spacing * ACTION_HORIZON
        remaining = polyline_length(ctx.demo) - s
        spacing = self.cfg.action_spacing
        if remaining <= horizon_m + self.cfg.goal_radius:
            spacing = max(remaining, 0.0) / ACTION_HORIZON
        world_wps = _next_points_along(ctx.demo, s, spacing, ACTION_HORIZON)
        ego = to_ego_frame_many(pose, world_wps)
        if self.codebook is not None:
            from .tokenizer import encode
            return PolicyResponse(tokens=ActionTokens(tuple(encode(self.codebook, w) for w in ego)))
        return PolicyResponse(waypoints=ego)

    def _act(self, ctx: ActContext) -> np.ndarray:
        return self.respond(ctx).resolve(self.codebook)


class RemotePolicy(Policy):
    """Client for a learned policy behind the wire protocol. Builds the
    request from the lazily-rendered canvas/front view, validates the
    response shape and token range against the active codebook."""

    name = "remote"
    wants_renders = True

    def __init__(self, endpoint: str, codebook: Optional[WaypointCodebook] = None,
                 timeout: float = 2.0):
        from .wire import WireClient
        self.client = WireClient(endpoint, timeout=timeout)
        self.codebook = codebook
        self.last_latency_s: Optional[float] = None

    def reset(self, ctx_free_seed: int = 0) -> None:
        self.client.close()

    def _act(self, ctx: ActContext) -> np.ndarray:
        if ctx.render_fn is None:
            raise ContractViolation("remote policy needs rendered inputs")
        front_b64, canvas_b64 = ctx.render_fn()
        request = PolicyRequest(
            tick=ctx.ep.tick,
            language=ctx.language,
            front_view_png_b64=front_b64,
            canvas_png_b64=canvas_b64,
            codebook_k=self.codebook.K if self.codebook else 0,
        )
        response = self.client.act(request, codebook=self.codebook)
        self.last_latency_s = response.latency_s
        return response.resolve(self.codebook)


def parse_response_dict(data: dict, codebook: Optional[WaypointCodebook]) -> PolicyResponse:
    """Validate a wire response object; raises ProtocolError/TokenOutOfRange."""
    if not isinstance(data, dict):
        raise ProtocolError(f"response must be an object, got {type(data).__name__}")
    if "error" in data:
        raise ProtocolError(f"server error: {data['error']}")
    has_tokens = "tokens" in data
    has_wps = "waypoints" in data
    if has_tokens == has_wps:
        raise ProtocolError("response must carry exactly one of tokens/waypoints")
    if has_tokens:
        tokens = data["tokens"]
        if (not isinstance(tokens, list) or len(tokens) != ACTION_HORIZON
                or not all(isinstance(t, int) and not isinstance(t, bool) for t in tokens)):
            raise ProtocolError(f"tokens must be {ACTION_HORIZON} integers, got {tokens!r}")
        k = codebook.K if codebook else None
        if k is not None:
            for t in tokens:
                if not 0 <= t < k:
                    raise TokenOutOfRange(f"token {t} outside [0, {k})")
        return PolicyResponse(tokens=ActionTokens(tuple(tokens)))
    wps = data["waypoints"]
    try:
        arr = np.asarray(wps, dtype=float)
    except (TypeError, ValueError):
        raise ProtocolError(f"waypoints not numeric: {wps!r}") from None
    if arr.shape != (ACTION_HORIZON, 2) or not np.all(np.isfinite(arr)):
        raise ProtocolError(f"waypoints must be {ACTION_HORIZON} finite [x,y] pairs")
    return PolicyResponse(waypoints=arr)
