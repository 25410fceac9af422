"""Evaluation metrics: discrete Fréchet distance, trajectory deviation
distance (interquartile mean over successes), constraint violation
checking, and the per-environment report aggregator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInput
from .geometry import Polyline, Point2, normalize_angle, polyline_length, resample_by_arclength
from .world import CellClass, ConstraintRegion, OccupancyGrid, points_in_region


def discrete_frechet(a: Polyline, b: Polyline) -> float:
    """Classic O(|a|*|b|) coupling DP:
    c(i,j) = max(d(a_i,b_j), min(c(i-1,j), c(i,j-1), c(i-1,j-1))).

    Distances use math.dist so the result is bit-identical to the plain
    recursive definition evaluated with the same scalar arithmetic.
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise DegenerateInput("empty polyline")
    pa = [(float(x), float(y)) for x, y in a.pts]
    pb = [(float(x), float(y)) for x, y in b.pts]
    dist = math.dist
    prev = [0.0] * m
    prev[0] = dist(pa[0], pb[0])
    for j in range(1, m):
        d = dist(pa[0], pb[j])
        prev[j] = d if d > prev[j - 1] else prev[j - 1]
    for i in range(1, n):
        row = [0.0] * m
        d = dist(pa[i], pb[0])
        row[0] = d if d > prev[0] else prev[0]
        for j in range(1, m):
            best = prev[j]
            if prev[j - 1] < best:
                best = prev[j - 1]
            if row[j - 1] < best:
                best = row[j - 1]
            d = dist(pa[i], pb[j])
            row[j] = d if d > best else best
        prev = row
    return prev[m - 1]


def frechet_resampled(a: Polyline, b: Polyline, resolution: float = 0.1) -> float:
    """Discrete Fréchet after densifying both curves to `resolution` spacing
    so the value tracks the continuous distance within one sample step.
    Degenerate (near-point) inputs are compared as-is."""
    def densify(line: Polyline) -> Polyline:
        if len(line) < 2 or polyline_length(line) <= resolution:
            return line
        return resample_by_arclength(line, resolution)
    return discrete_frechet(densify(a), densify(b))


@dataclass
class EpisodeOutcome:
    datapoint_id: str
    environment: str
    condition: str                      # "precise" | "misleading"
    success: bool
    collided: bool
    frechet_to_demo: Optional[float] = None
    violations: list = field(default_factory=list)   # (region_id, time)
    iteration: int = 0
    extras: dict = field(default_factory=dict)       # policy diagnostics

    def to_dict(self) -> dict:
        return {
            "datapoint_id": self.datapoint_id,
            "environment": self.environment,
            "condition": self.condition,
            "iteration": self.iteration,
            "success": self.success,
            "collided": self.collided,
            "frechet_to_demo": self.frechet_to_demo,
            "violations": [[rid, t] for rid, t in self.violations],
            "extras": dict(self.extras),
        }


def trajectory_deviation_distance(outcomes: Sequence[EpisodeOutcome]) -> Optional[float]:
    """Interquartile mean of Fréchet distances over SUCCESS episodes only.

    Quartiles are linear-interpolated and the bounds are inclusive
    (Q1 <= v <= Q3). Fewer than 4 values: plain mean. No values: None.
    """
    values = sorted(o.frechet_to_demo for o in outcomes
                    if o.success and o.frechet_to_demo is not None)
    if not values:
        return None
    if len(values) < 4:
        return float(np.mean(values))
    q1, q3 = np.quantile(values, [0.25, 0.75])
    kept = [v for v in values if q1 - 1e-12 <= v <= q3 + 1e-12]
    return float(np.mean(kept))


def _segment_boundary_crossing(p0, p1, poly: np.ndarray):
    """First intersection point of segment p0->p1 with the polygon boundary,
    or None. Used to locate where a trajectory crosses a guarded edge."""
    best_t = None
    best_pt = None
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    for i in range(len(poly) - 1):
        ax, ay = poly[i]
        bx, by = poly[i + 1]
        ex, ey = bx - ax, by - ay
        denom = dx * ey - dy * ex
        if abs(denom) < 1e-15:
            continue
        t = ((ax - p0[0]) * ey - (ay - p0[1]) * ex) / denom
        u = ((ax - p0[0]) * dy - (ay - p0[1]) * dx) / denom
        if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
            if best_t is None or t < best_t:
                best_t = t
                best_pt = (p0[0] + t * dx, p0[1] + t * dy)
    return best_pt


def _near_crosswalk(grid: OccupancyGrid, p, tol_cells: int = 1) -> bool:
    """Crossing points sit on cell edges; accept Crosswalk within one cell."""
    pt = Point2(float(p[0]), float(p[1]))
    if grid.class_at(pt) == CellClass.Crosswalk:
        return True
    col, row = grid.cell_of(pt)
    for dr in range(-tol_cells, tol_cells + 1):
        for dc in range(-tol_cells, tol_cells + 1):
            r, c = row + dr, col + dc
            if 0 <= r < grid.height and 0 <= c < grid.width:
                if int(grid.cells[r, c]) == int(CellClass.Crosswalk):
                    return True
    return False


def check_violations(times: np.ndarray, points: np.ndarray,
                     regions: Sequence[ConstraintRegion],
                     grid: Optional[OccupancyGrid] = None,
                     min_speed: float = 0.05,
                     lane_patience: float = 1.0) -> list:
    """Scan a timestamped trajectory for commonsense-constraint violations.

    ForbiddenArea: one violation at the first sample inside.
    CrossOnlyAt: one violation per boundary traversal whose entry or exit
      point is not on Crosswalk cells (requires `grid`); a trajectory that
      starts inside the region is not charged for the implicit entry.
    DirectionalLane: one violation per continuous excursion where, inside
      the lane polygon and moving faster than `min_speed`, the smoothed
      motion direction deviates from the lane direction by more than 90 deg
      for longer than `lane_patience` seconds.
    """
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    violations: list = []
    if len(points) == 0:
        return violations
    for region in regions:
        if region.kind == "ForbiddenArea":
            inside = points_in_region(region, points)
            if inside.any():
                first = int(np.argmax(inside))
                violations.append((region.id, float(times[first])))
        elif region.kind == "CrossOnlyAt":
            if grid is None:
                raise ValueError("CrossOnlyAt checking requires the occupancy grid")
            inside = points_in_region(region, points)
            i = 0
            n = len(points)
            while i < n:
                if not inside[i]:
                    i += 1
                    continue
                # Traversal episode [entry_idx, exit_idx).
                entry_idx = i
                while i < n and inside[i]:
                    i += 1
                exit_idx = i
                ok = True
                if entry_idx > 0:
                    pt = _segment_boundary_crossing(points[entry_idx - 1], points[entry_idx],
                                                    region.polygon.pts)
                    if pt is not None and not _near_crosswalk(grid, pt):
                        ok = False
                if ok and exit_idx < n:
                    pt = _segment_boundary_crossing(points[exit_idx - 1], points[exit_idx],
                                                    region.polygon.pts)
                    if pt is not None and not _near_crosswalk(grid, pt):
                        ok = False
                if not ok:
                    violations.append((region.id, float(times[entry_idx])))
        elif region.kind == "DirectionalLane":
            if len(points) < 2:
                continue
            inside = points_in_region(region, points)
            # Smoothed motion direction via +-1 sample central differences.
            prev_idx = np.maximum(np.arange(len(points)) - 1, 0)
            next_idx = np.minimum(np.arange(len(points)) + 1, len(points) - 1)
            disp = points[next_idx] - points[prev_idx]
            span = np.maximum(times[next_idx] - times[prev_idx], 1e-9)
            speed = np.hypot(disp[:, 0], disp[:, 1]) / span
            heading = np.arctan2(disp[:, 1], disp[:, 0])
            dev = np.abs(np.array([normalize_angle(h - region.direction_rad) for h in heading]))
            wrong = inside & (speed > min_speed) & (dev > math.pi / 2 + 1e-12)
            start_t = None
            reported = False
            for k in range(len(points)):
                if wrong[k]:
                    if start_t is None:
                        start_t = times[k]
                        reported = False
                    if not reported and times[k] - start_t > lane_patience:
                        violations.append((region.id, float(start_t)))
                        reported = True
                else:
                    start_t = None
                    reported = False
    violations.sort(key=lambda v: (v[1], v[0]))
    return violations


@dataclass
class ConditionStats:
    episodes: int = 0
    sr: float = 0.0      # percent
    cr: float = 0.0      # percent
    ivr: float = 0.0     # percent
    tdd: Optional[float] = None

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "sr": self.sr, "cr": self.cr,
                "ivr": self.ivr, "tdd": self.tdd}


@dataclass
class EvalReport:
    environments: dict            # env -> {condition -> ConditionStats}
    totals: dict                  # env -> total SR percent
    header: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "environments": {
                env: {cond: stats.to_dict() for cond, stats in conds.items()}
                for env, conds in self.environments.items()
            },
            "totals": self.totals,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def to_text(self) -> str:
        lines = []
        if self.header:
            lines.append("# config: " + json.dumps(self.header, sort_keys=True))
        lines.append(f"{'environment':<18}{'condition':<12}{'N':>4}{'SR%':>7}{'CR%':>7}{'IVR%':>7}{'TDD(m)':>9}")
        lines.append("-" * 64)
        for env in sorted(self.environments):
            for cond in ("precise", "misleading"):
                stats = self.environments[env].get(cond)
                if stats is None:
                    continue
                tdd = f"{stats.tdd:.3f}" if stats.tdd is not None else "-"
                lines.append(f"{env:<18}{cond:<12}{stats.episodes:>4}"
                             f"{stats.sr:>7.0f}{stats.cr:>7.0f}{stats.ivr:>7.0f}{tdd:>9}")
            lines.append(f"{env:<18}{'total':<12}{'':>4}{self.totals[env]:>7.0f}")
            lines.append("-" * 64)
        return "\n".join(lines) + "\n"


def aggregate_report(outcomes: Sequence[EpisodeOutcome], header: Optional[dict] = None) -> EvalReport:
    """Fold per-episode outcomes into the environment x condition table.

    SR = successes/episodes, CR = episodes with >=1 collision, IVR =
    episodes with >=1 violation, TDD per trajectory_deviation_distance;
    total SR weights conditions by episode count."""
    envs: dict = {}
    for o in outcomes:
        envs.setdefault(o.environment, {}).setdefault(o.condition, []).append(o)
    environments = {}
    totals = {}
    for env, conds in envs.items():
        environments[env] = {}
        all_eps = 0
        all_succ = 0
        for cond, outs in conds.items():
            n = len(outs)
            succ = sum(1 for o in outs if o.success)
            stats = ConditionStats(
                episodes=n,
                sr=100.0 * succ / n if n else 0.0,
                cr=100.0 * sum(1 for o in outs if o.collided) / n if n else 0.0,
                ivr=100.0 * sum(1 for o in outs if o.violations) / n if n else 0.0,
                tdd=trajectory_deviation_distance(outs),
            )
            environments[env][cond] = stats
            all_eps += n
            all_succ += succ
        totals[env] = 100.0 * all_succ / all_eps if all_eps else 0.0
    return EvalReport(environments=environments, totals=totals, header=header or {})
