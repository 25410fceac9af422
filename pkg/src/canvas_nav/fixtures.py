"""Bundled fixture worlds: four small hand-authored environments (office,
street-with-crosswalk, orchard-with-rocks, and a held-out gallery) plus
their datapoints with demonstrations.

Geometry is sized for the default robot (0.3 m footprint, 0.55 m planning
inflation): corridors >= 2 m, doors 1.8 m, orchard rows 5 m apart with
rocks offset ~0.25 m from the sketch line so a rock-blind planner clips
them while a rock-aware one can detour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import (
    MISLEADING,
    PRECISE,
    Datapoint,
    annotate_fd,
    atomic_write,
    save_datapoint,
    stable_json,
)
from .errors import ConditionMismatch
from .geometry import Point2, Polyline, Pose2, polyline_length, resample_by_arclength
from .world import (
    CellClass,
    ConstraintRegion,
    OccupancyGrid,
    save_map,
    sketch_blocking_segments,
)

ENVIRONMENTS = ("office", "street", "orchard", "gallery")
RES = 0.1
NOMINAL_SPEED = 1.0  # m/s, used for synthetic demo durations


def _grid(width_m: float, height_m: float, fill: CellClass) -> OccupancyGrid:
    w = int(round(width_m / RES))
    h = int(round(height_m / RES))
    cells = np.full((h, w), int(fill), dtype=np.uint8)
    return OccupancyGrid(w, h, RES, Point2(0.0, 0.0), cells)


def _rect(grid: OccupancyGrid, x0, y0, x1, y1, cls: CellClass) -> None:
    c0 = int(round(x0 / RES))
    c1 = int(round(x1 / RES))
    r0 = int(round(y0 / RES))
    r1 = int(round(y1 / RES))
    grid.cells[r0:r1, c0:c1] = int(cls)


def _border(grid: OccupancyGrid, thickness: float = 0.2) -> None:
    w_m, h_m = grid.extent_m
    _rect(grid, 0, 0, w_m, thickness, CellClass.Wall)
    _rect(grid, 0, h_m - thickness, w_m, h_m, CellClass.Wall)
    _rect(grid, 0, 0, thickness, h_m, CellClass.Wall)
    _rect(grid, w_m - thickness, 0, w_m, h_m, CellClass.Wall)


def _region(rid: str, kind: str, x0, y0, x1, y1, direction=None) -> ConstraintRegion:
    poly = Polyline([(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)])
    return ConstraintRegion(rid, kind, poly, direction)


def bevel_corners(points, radius: float = 0.4) -> Polyline:
    """Cut interior corners at `radius` so demos look human-driven and the
    controller can track them tightly."""
    pts = [np.asarray(p, dtype=float) for p in points]
    if len(pts) <= 2:
        return Polyline(pts)
    out = [pts[0]]
    for i in range(1, len(pts) - 1):
        prev, cur, nxt = pts[i - 1], pts[i], pts[i + 1]
        din = cur - prev
        dout = nxt - cur
        lin = float(np.hypot(*din))
        lout = float(np.hypot(*dout))
        if lin < 1e-9 or lout < 1e-9:
            out.append(cur)
            continue
        r = min(radius, lin / 2, lout / 2)
        out.append(cur - din / lin * r)
        out.append(cur + dout / lout * r)
    out.append(pts[-1])
    return Polyline(out)


def _make_demo(via_points, bevel: float = 0.4) -> Polyline:
    """Dense (0.1 m) beveled trajectory through the via points."""
    return resample_by_arclength(bevel_corners(via_points, bevel), 0.1)


def _sketch_from_demo(demo: Polyline, grid: OccupancyGrid, rng: np.random.Generator,
                      jitter: float = 0.12) -> Polyline:
    """Hand-drawn-looking precise sketch: sparse samples of the demo with
    interior jitter, shrunk until it stays obstacle-free."""
    base = resample_by_arclength(demo, 1.0)
    for scale in (1.0, 0.5, 0.25, 0.0):
        pts = base.pts.copy()
        if scale > 0 and len(pts) > 2:
            pts[1:-1] += rng.normal(0.0, jitter * scale, (len(pts) - 2, 2))
        candidate = Polyline(pts)
        if not sketch_blocking_segments(grid, candidate):
            return candidate
    return base


@dataclass
class RouteSpec:
    via: list
    language: str


def _build_datapoint(env: str, index: int, condition: str, grid: OccupancyGrid,
                     route: RouteSpec, constraints, rng: np.random.Generator,
                     sketch: Optional[Polyline] = None, bevel: float = 0.4) -> Datapoint:
    demo = _make_demo(route.via, bevel)
    if sketch is None:
        sketch = _sketch_from_demo(demo, grid, rng)
    start = route.via[0]
    nxt = demo.pts[min(3, len(demo) - 1)]
    heading = math.atan2(nxt[1] - start[1], nxt[0] - start[0])
    tag = "p" if condition == PRECISE else "m"
    dp = Datapoint(
        id=f"{env}_{tag}_{index:04d}",
        environment=env,
        map_ref="map.pgm",
        sketch=sketch,
        language=route.language,
        condition=condition,
        goal=Point2(*route.via[-1]),
        start_pose=Pose2(start[0], start[1], heading),
        constraints=list(constraints),
        demo=demo,
        demo_duration=polyline_length(demo) / NOMINAL_SPEED,
    )
    return annotate_fd(dp)


# ---------------------------------------------------------------------------
# office: rooms around a central corridor


def build_office():
    grid = _grid(20.0, 14.0, CellClass.Free)
    _border(grid)
    # corridor between y=5.2 and y=9.0
    _rect(grid, 0.2, 5.0, 19.8, 5.2, CellClass.Wall)
    _rect(grid, 0.2, 9.0, 19.8, 9.2, CellClass.Wall)
    # doors in the lower wall
    for x0 in (3.0, 9.4, 15.6):
        _rect(grid, x0, 5.0, x0 + 1.8, 5.2, CellClass.Free)
    # doors in the upper wall
    for x0 in (2.6, 8.4, 14.6):
        _rect(grid, x0, 9.0, x0 + 1.8, 9.2, CellClass.Free)
    # room dividers
    _rect(grid, 7.0, 0.2, 7.2, 5.0, CellClass.Wall)
    _rect(grid, 13.0, 0.2, 13.2, 5.0, CellClass.Wall)
    _rect(grid, 6.0, 9.2, 6.2, 13.8, CellClass.Wall)
    _rect(grid, 12.0, 9.2, 12.2, 13.8, CellClass.Wall)
    regions = [_region("wet_floor", "ForbiddenArea", 17.5, 5.3, 19.5, 6.1)]
    routes = [
        RouteSpec([(1.5, 7.1), (18.5, 7.1)], "Carry the coffee to the east lounge."),
        RouteSpec([(18.5, 6.6), (1.5, 6.6)], "Return the tray to the kitchenette."),
        RouteSpec([(3.9, 2.6), (3.9, 6.2), (16.5, 6.2), (16.5, 2.6)],
                  "Deliver the mail from the copy room to the archive."),
        RouteSpec([(3.5, 11.5), (3.5, 8.0), (15.5, 8.0), (15.5, 11.5)],
                  "Bring the projector to the far meeting room."),
        RouteSpec([(10.3, 2.6), (10.3, 7.1), (9.3, 7.1), (9.3, 11.5)],
                  "Take the samples from the lab to the north office."),
        RouteSpec([(1.5, 8.2), (12.0, 8.2)], "Drop the memo at the middle desk."),
        RouteSpec([(1.5, 2.0), (3.9, 2.0), (3.9, 6.2), (8.0, 6.2), (8.0, 7.5)],
                  "Fetch the printer cart into the corridor."),
        RouteSpec([(17.5, 11.0), (15.5, 11.0), (15.5, 7.5), (5.0, 7.5)],
                  "Escort the visitor toward the west wing."),
        RouteSpec([(16.5, 3.5), (16.5, 6.2), (3.5, 6.2), (3.5, 11.0)],
                  "Move the archive box to the north storage."),
        RouteSpec([(1.5, 5.8), (9.0, 5.8), (9.0, 8.4), (18.5, 8.4)],
                  "Patrol the corridor and stop at the east window."),
    ]
    return grid, regions, routes


def office_misleading_sketches():
    """(route index, sketch via points) for the wall-clipping strokes.

    Each sketch drags the pen along a wall centerline for > 2 m, so one of
    the 2 m-spaced point-to-point subgoals always lands inside the inflated
    wall; a planner that trusts the stroke must fall back and collide."""
    return [
        # B1 -> B3, pen dragged up the first room divider (x = 7.1)
        (2, [(3.9, 2.6), (6.3, 2.2), (7.1, 2.4), (7.1, 4.7), (8.2, 3.4), (16.5, 2.6)]),
        # T1 -> T3, pen dragged down the second top divider (x = 12.1)
        (3, [(3.5, 11.5), (11.0, 11.8), (12.1, 12.6), (12.1, 10.3), (13.4, 10.9), (15.5, 11.5)]),
        # room -> corridor, stroke rides the lower corridor wall (y = 5.1)
        (6, [(1.5, 2.0), (5.2, 4.4), (5.5, 5.1), (7.8, 5.1), (8.0, 6.2), (8.0, 7.5)]),
        # T3 -> west corridor, stroke rides the upper corridor wall (y = 9.1)
        (7, [(17.5, 11.0), (14.0, 9.6), (13.5, 9.1), (10.6, 9.1), (9.0, 8.2), (5.0, 7.5)]),
        # B3 -> T1, stroke rides the lower corridor wall between doors
        (8, [(16.5, 3.5), (14.6, 4.3), (14.0, 5.1), (11.5, 5.1), (10.8, 6.2),
             (10.0, 7.0), (3.5, 7.0), (3.5, 11.0)]),
    ]


# ---------------------------------------------------------------------------
# street: sidewalks, two-lane road, one crosswalk


def build_street():
    grid = _grid(30.0, 20.0, CellClass.Grass)
    _rect(grid, 0, 1.0, 30.0, 4.0, CellClass.Sidewalk)
    _rect(grid, 0, 4.0, 30.0, 12.0, CellClass.Road)
    _rect(grid, 0, 12.0, 30.0, 15.0, CellClass.Sidewalk)
    _rect(grid, 0, 15.5, 30.0, 19.5, CellClass.Wall)       # building row
    for x0 in (5.0, 13.0, 21.0):                            # storefront gaps
        _rect(grid, x0, 15.5, x0 + 2.0, 19.5, CellClass.Grass)
    _rect(grid, 14.0, 3.5, 16.0, 12.5, CellClass.Crosswalk)
    _border(grid)
    regions = [
        _region("road", "CrossOnlyAt", 0.2, 4.0, 29.8, 12.0),
        _region("east_lane", "DirectionalLane", 0.2, 4.0, 29.8, 8.0, direction=0.0),
        _region("west_lane", "DirectionalLane", 0.2, 8.0, 29.8, 12.0, direction=math.pi),
    ]
    routes = [
        RouteSpec([(3.0, 2.5), (15.0, 2.5), (15.0, 13.2), (26.0, 13.2)],
                  "Deliver the package across the street; use the crosswalk."),
        RouteSpec([(26.0, 13.4), (15.0, 13.4), (15.0, 2.8), (4.0, 2.8)],
                  "Bring the cart back to the depot on the south side."),
        RouteSpec([(2.0, 2.2), (27.0, 2.2)],
                  "Follow the south sidewalk to the corner mailbox."),
    ]
    return grid, regions, routes


def street_misleading_sketches():
    """Sloppy sketches: road crossed away from the crosswalk and strokes
    poking into the building row (so they clip blocking cells)."""
    return [
        ([(3.0, 2.5), (22.0, 2.5), (22.0, 13.2), (23.0, 16.5)],
         [(3.0, 2.5), (15.0, 2.5), (15.0, 13.2), (22.0, 13.2)],
         "Deliver the package across the street; use the crosswalk."),
        ([(26.0, 13.4), (8.0, 13.4), (8.0, 2.8), (6.5, 0.1)],
         [(26.0, 13.4), (15.0, 13.4), (15.0, 2.8), (6.5, 2.8)],
         "Bring the cart back to the depot on the south side."),
        ([(2.0, 2.2), (10.0, 2.2), (10.0, 16.2)],
         [(2.0, 2.2), (10.0, 2.2), (14.8, 2.5), (14.8, 13.2), (10.0, 13.2)],
         "Walk to the north-side kiosk."),
    ]


# ---------------------------------------------------------------------------
# orchard: grass field, two trunk rows, rocks beside the sketch line


ROCK_XS = (5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0)


def build_orchard():
    grid = _grid(24.0, 16.0, CellClass.Grass)
    _border(grid)
    # trunk rows bounding the working corridor
    for row_y in (5.4, 10.4):
        x = 2.0
        while x < 22.5:
            _rect(grid, x, row_y, x + 0.3, row_y + 0.3, CellClass.Obstacle)
            x += 2.0
    # rocks alternating just above/below the y=8 line, ~0.25 m off it
    for i, rx in enumerate(ROCK_XS):
        ry = 8.2 if i % 2 == 0 else 7.6
        _rect(grid, rx, ry, rx + 0.2, ry + 0.2, CellClass.Rock)
    regions: list = []
    routes = []
    for k in range(5):
        y0 = 8.0 + (k - 2) * 0.02      # nearly identical straight passes
        via = [(2.0 + 0.1 * k, y0)]
        # the human demo weaves around each rock by ~0.8 m
        for i, rx in enumerate(ROCK_XS):
            side = -1.0 if i % 2 == 0 else 1.0   # dodge away from the rock
            via.append((rx - 0.9, y0))
            via.append((rx + 0.1, y0 + side * 0.8))
            via.append((rx + 1.1, y0))
        via.append((22.0, y0))
        routes.append(RouteSpec(via, "Spray along the tree row; mind the ground."))
    return grid, regions, routes


def orchard_straight_sketch(route: RouteSpec) -> Polyline:
    """The rough human sketch for orchard passes: a straight line down the
    row, ignoring the rocks (they are too small to draw)."""
    start = route.via[0]
    end = route.via[-1]
    return Polyline([start, ((start[0] + end[0]) / 2, (start[1] + end[1]) / 2), end])


# ---------------------------------------------------------------------------
# gallery (held out): two rooms, plinths, one wide doorway


def build_gallery():
    grid = _grid(14.0, 10.0, CellClass.Free)
    _border(grid)
    _rect(grid, 7.0, 0.2, 7.2, 4.0, CellClass.Wall)
    _rect(grid, 7.0, 6.0, 7.2, 9.8, CellClass.Wall)   # doorway y in [4, 6]
    for px, py in ((3.5, 5.0), (10.5, 5.0)):
        _rect(grid, px - 0.2, py - 0.2, px + 0.2, py + 0.2, CellClass.Obstacle)
    regions = [_region("exhibit_zone", "ForbiddenArea", 2.8, 4.3, 4.2, 5.7)]
    # routes thread the doorway (x=7.1, y in [4,6]) and keep >= 0.8 m from
    # the plinths at (3.5, 5) and (10.5, 5)
    routes = [
        RouteSpec([(1.5, 2.0), (5.5, 2.0), (5.5, 5.0), (8.6, 5.0), (9.5, 4.2), (12.0, 4.2)],
                  "Guide the guest to the east hall."),
        RouteSpec([(12.5, 8.0), (10.5, 6.4), (8.6, 5.2), (7.1, 5.1), (5.8, 5.3), (5.0, 6.2), (1.8, 6.2)],
                  "Return to the lobby without disturbing the exhibit."),
        RouteSpec([(1.5, 8.0), (5.5, 8.0), (5.5, 5.4), (7.1, 5.1), (9.0, 4.6), (9.0, 2.0)],
                  "Bring the catalog to the south-east corner."),
        RouteSpec([(12.0, 2.0), (9.3, 2.0), (9.3, 4.4), (7.1, 4.9), (5.2, 5.6), (2.0, 6.5)],
                  "Escort the artist to the west annex."),
    ]
    return grid, regions, routes


# ---------------------------------------------------------------------------
# dataset assembly


_BUILDERS = {
    "office": build_office,
    "street": build_street,
    "orchard": build_orchard,
    "gallery": build_gallery,
}


def build_environment(env: str):
    grid, regions, routes = _BUILDERS[env]()
    return grid, regions, routes


def build_fixture_datasets(root, seed: int = 7) -> dict:
    """Write all four environment directories (maps + datapoints) under
    `root`. Deterministic for a given seed. Returns a per-env summary."""
    root = Path(root)
    summary = {}
    for env_index, env in enumerate(ENVIRONMENTS):
        grid, regions, routes = build_environment(env)
        env_dir = root / env
        (env_dir / "datapoints").mkdir(parents=True, exist_ok=True)
        pgm, meta = save_map(grid, regions)
        (env_dir / "map.pgm").write_bytes(pgm)
        (env_dir / "map.json").write_bytes(meta)
        rng = np.random.default_rng(seed * 1000 + env_index)
        constraint_ids = [r.id for r in regions]
        dps = []
        if env == "orchard":
            for i, route in enumerate(routes):
                dp = _build_datapoint(env, i, PRECISE, grid, route, constraint_ids, rng,
                                      sketch=orchard_straight_sketch(route), bevel=0.5)
                dps.append(dp)
        elif env == "street":
            for i, route in enumerate(routes):
                dps.append(_build_datapoint(env, i, PRECISE, grid, route, constraint_ids, rng))
            for i, (sketch_via, demo_via, language) in enumerate(street_misleading_sketches()):
                route = RouteSpec(demo_via, language)
                dps.append(_build_datapoint(env, i, MISLEADING, grid, route, constraint_ids, rng,
                                            sketch=Polyline(sketch_via)))
        elif env == "office":
            for i, route in enumerate(routes):
                dps.append(_build_datapoint(env, i, PRECISE, grid, route, constraint_ids, rng))
            for i, (route_idx, sketch_via) in enumerate(office_misleading_sketches()):
                sketch = Polyline(sketch_via)
                if not sketch_blocking_segments(grid, sketch):
                    raise ConditionMismatch(f"office misleading sketch {i} unexpectedly clean")
                dps.append(_build_datapoint(env, i, MISLEADING, grid, routes[route_idx],
                                            constraint_ids, rng, sketch=sketch))
        else:
            for i, route in enumerate(routes):
                dps.append(_build_datapoint(env, i, PRECISE, grid, route, constraint_ids, rng))
        for dp in dps:
            save_datapoint(dp, env_dir / "datapoints" / f"dp_{dp.id}.json", grid)
        summary[env] = {"datapoints": len(dps), "regions": len(regions)}
    atomic_write(root / "manifest.json", stable_json({"seed": seed, "environments": summary}))
    return summary


def generate_condition_pairs(env: str, n: int, seed: int = 0) -> list:
    """Generate n (precise, misleading) datapoint pairs for the FD-ordering
    study: both share the same human demo; the misleading sketch is the
    precise one pushed into the nearest obstacle."""
    from .dataset import make_misleading

    grid, regions, routes = build_environment(env)
    rng = np.random.default_rng(seed)
    constraint_ids = [r.id for r in regions]
    pairs = []
    i = 0
    while len(pairs) < n:
        route = routes[i % len(routes)]
        if env == "orchard":
            precise = _build_datapoint(env, 1000 + i, PRECISE, grid, route, constraint_ids, rng,
                                       sketch=orchard_straight_sketch(route), bevel=0.5)
        else:
            precise = _build_datapoint(env, 1000 + i, PRECISE, grid, route, constraint_ids, rng)
        noisy_sketch = make_misleading(grid, precise.sketch, seed=int(rng.integers(2**31)))
        misleading = Datapoint(
            id=f"{env}_m_{1000 + i:04d}", environment=env, map_ref="map.pgm",
            sketch=noisy_sketch, language=route.language, condition=MISLEADING,
            goal=precise.goal, start_pose=precise.start_pose,
            constraints=list(constraint_ids), demo=precise.demo,
            demo_duration=precise.demo_duration)
        pairs.append((precise, annotate_fd(misleading)))
        i += 1
    return pairs
