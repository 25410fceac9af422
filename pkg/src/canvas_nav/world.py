"""Occupancy/semantic grid world: collision queries, raycasting, constraint
regions, and PGM + JSON map I/O.

Grid convention: cells[row, col] with row 0 at the LOWEST y (origin is the
world position of the lower-left corner of cell (0,0)). PGM files store the
top row first, so load/save flip vertically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import ClassError, FormatError, OutOfBounds
from .geometry import Point2, Polyline

class CellClass(IntEnum):
    Free = 0
    Wall = 1
    Obstacle = 2
    Rock = 3
    Grass = 4
    Road = 5
    Sidewalk = 6
    Crosswalk = 7


# Rock blocks but Grass does not, although both are physically low; the
# distinction matters for the legacy-perception failure mode.
BLOCKING = frozenset({CellClass.Wall, CellClass.Obstacle, CellClass.Rock})

# Canonical gray values written by save_map; loaders may declare any table.
DEFAULT_CLASS_GRAY = {
    CellClass.Free: 255,
    CellClass.Wall: 0,
    CellClass.Obstacle: 64,
    CellClass.Rock: 96,
    CellClass.Road: 128,
    CellClass.Grass: 160,
    CellClass.Sidewalk: 192,
    CellClass.Crosswalk: 224,
}

REGION_KINDS = ("ForbiddenArea", "CrossOnlyAt", "DirectionalLane")


@dataclass(frozen=True)
class ConstraintRegion:
    """Commonsense constraint area: a closed polygon plus a rule kind."""

    id: str
    kind: str
    polygon: Polyline
    direction_rad: Optional[float] = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise FormatError(f"unknown region kind {self.kind!r}")
        pts = self.polygon.pts
        if len(pts) < 4 or not np.allclose(pts[0], pts[-1]):
            raise FormatError(f"region {self.id!r} polygon must be closed with >= 4 points")
        if self.kind == "DirectionalLane" and self.direction_rad is None:
            raise FormatError(f"DirectionalLane {self.id!r} needs direction_rad")


@dataclass
class OccupancyGrid:
    width: int
    height: int
    resolution: float
    origin: Point2
    cells: np.ndarray = field(repr=False)  # (height, width) uint8 of CellClass

    def __post_init__(self):
        if self.resolution <= 0:
            raise FormatError(f"resolution must be > 0, got {self.resolution}")
        if self.cells.shape != (self.height, self.width):
            raise FormatError(f"cell array shape {self.cells.shape} != ({self.height}, {self.width})")

    @property
    def extent_m(self):
        return self.width * self.resolution, self.height * self.resolution

    def in_bounds(self, p: Point2) -> bool:
        wx, wy = self.extent_m
        return (self.origin.x <= p.x < self.origin.x + wx and
                self.origin.y <= p.y < self.origin.y + wy)

    def cell_of(self, p: Point2):
        """(col, row) of the cell containing p; no bounds check."""
        col = int(math.floor((p.x - self.origin.x) / self.resolution))
        row = int(math.floor((p.y - self.origin.y) / self.resolution))
        return col, row

    def cell_center(self, col: int, row: int) -> Point2:
        return Point2(self.origin.x + (col + 0.5) * self.resolution,
                      self.origin.y + (row + 0.5) * self.resolution)

    def class_at(self, p: Point2) -> Optional[CellClass]:
        """Cell class at a world point, None outside the grid."""
        if not self.in_bounds(p):
            return None
        col, row = self.cell_of(p)
        return CellClass(int(self.cells[row, col]))

    def blocking_mask(self) -> np.ndarray:
        return np.isin(self.cells, [int(c) for c in BLOCKING])


def is_blocked(grid: OccupancyGrid, p: Point2, footprint_radius: float) -> bool:
    """True iff any blocking cell center lies within footprint_radius of p,
    or p is outside the grid. Grass never blocks."""
    if footprint_radius < 0:
        raise ValueError("footprint_radius must be >= 0")
    if not grid.in_bounds(p):
        return True
    res = grid.resolution
    reach = int(math.ceil(footprint_radius / res)) + 1
    col, row = grid.cell_of(p)
    c0 = max(0, col - reach)
    c1 = min(grid.width - 1, col + reach)
    r0 = max(0, row - reach)
    r1 = min(grid.height - 1, row + reach)
    window = grid.cells[r0:r1 + 1, c0:c1 + 1]
    blocked = np.isin(window, [int(c) for c in BLOCKING])
    if not blocked.any():
        return False
    rows, cols = np.nonzero(blocked)
    cx = grid.origin.x + (cols + c0 + 0.5) * res
    cy = grid.origin.y + (rows + r0 + 0.5) * res
    d2 = (cx - p.x) ** 2 + (cy - p.y) ** 2
    return bool(np.any(d2 <= footprint_radius ** 2 + 1e-12))


def _inflation_kernel(radius: float, resolution: float) -> np.ndarray:
    """Offsets whose cell center lies within `radius` of the blocking cell's
    square region (distance point-to-square, so radius 0 keeps only the cell
    itself and one-cell inflation yields the full 3x3 neighborhood)."""
    reach = int(math.ceil(radius / resolution)) + 1
    size = 2 * reach + 1
    kern = np.zeros((size, size), dtype=bool)
    for di in range(-reach, reach + 1):
        for dj in range(-reach, reach + 1):
            ddx = max(0.0, (abs(dj) - 0.5)) * resolution
            ddy = max(0.0, (abs(di) - 0.5)) * resolution
            if math.hypot(ddx, ddy) <= radius + 1e-12:
                kern[di + reach, dj + reach] = True
    return kern


def inflate(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Grow blocking cells: every non-blocking cell within `radius` of a
    blocking cell becomes Obstacle; all other classes are preserved.
    inflate(g, 0) == g exactly."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    blocking = grid.blocking_mask()
    if radius == 0 or not blocking.any():
        return OccupancyGrid(grid.width, grid.height, grid.resolution, grid.origin, grid.cells.copy())
    kern = _inflation_kernel(radius, grid.resolution)
    dilated = ndimage.binary_dilation(blocking, structure=kern)
    cells = grid.cells.copy()
    cells[dilated & ~blocking] = int(CellClass.Obstacle)
    return OccupancyGrid(grid.width, grid.height, grid.resolution, grid.origin, cells)


def raycast(grid: OccupancyGrid, origin: Point2, direction: float, max_range: float,
            stop_classes=BLOCKING):
    """March the ray cell by cell (Amanatides-Woo) and return
    (hit_distance, hit_class) at the first stop-class cell boundary, or
    (max_range, None) if nothing is hit inside the grid within max_range."""
    if max_range <= 0:
        raise ValueError("max_range must be > 0")
    if not grid.in_bounds(origin):
        raise OutOfBounds(f"ray origin {origin} outside grid")
    stop = {int(c) for c in stop_classes}
    res = grid.resolution
    col, row = grid.cell_of(origin)
    if int(grid.cells[row, col]) in stop:
        return 0.0, CellClass(int(grid.cells[row, col]))
    dx = math.cos(direction)
    dy = math.sin(direction)
    step_c = 1 if dx > 0 else -1
    step_r = 1 if dy > 0 else -1
    # Parametric distance to the next vertical / horizontal grid line.
    if abs(dx) < 1e-15:
        t_max_x = math.inf
        t_dx = math.inf
    else:
        next_x = grid.origin.x + (col + (1 if dx > 0 else 0)) * res
        t_max_x = (next_x - origin.x) / dx
        t_dx = res / abs(dx)
    if abs(dy) < 1e-15:
        t_max_y = math.inf
        t_dy = math.inf
    else:
        next_y = grid.origin.y + (row + (1 if dy > 0 else 0)) * res
        t_max_y = (next_y - origin.y) / dy
        t_dy = res / abs(dy)
    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            t_max_x += t_dx
            col += step_c
        else:
            t = t_max_y
            t_max_y += t_dy
            row += step_r
        if t > max_range:
            return max_range, None
        if col < 0 or col >= grid.width or row < 0 or row >= grid.height:
            return max_range, None
        cls = int(grid.cells[row, col])
        if cls in stop:
            return float(t), CellClass(cls)


def _on_segment(p: Point2, a, b, eps: float = 1e-9) -> bool:
    ax, ay = a
    bx, by = b
    cross = (bx - ax) * (p.y - ay) - (by - ay) * (p.x - ax)
    seg2 = (bx - ax) ** 2 + (by - ay) ** 2
    if cross * cross > eps * eps * max(seg2, 1e-30):
        return False
    dot = (p.x - ax) * (bx - ax) + (p.y - ay) * (by - ay)
    return -eps <= dot <= seg2 + eps


def point_in_region(region: ConstraintRegion, p: Point2) -> bool:
    """Even-odd point-in-polygon; boundary points count as inside."""
    pts = region.polygon.pts
    for i in range(len(pts) - 1):
        if _on_segment(p, pts[i], pts[i + 1]):
            return True
    inside = False
    for i in range(len(pts) - 1):
        x1, y1 = pts[i]
        x2, y2 = pts[i + 1]
        # Half-open edge rule keeps vertex crossings counted once.
        if (y1 > p.y) != (y2 > p.y):
            x_cross = x1 + (p.y - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > p.x:
                inside = not inside
    return inside


def points_in_region(region: ConstraintRegion, pts: np.ndarray) -> np.ndarray:
    """Vectorized interior test (boundary handling as in point_in_region is
    resolved per point only when it matters; bulk test uses even-odd)."""
    pts = np.asarray(pts, dtype=float)
    poly = region.polygon.pts
    inside = np.zeros(len(pts), dtype=bool)
    x, y = pts[:, 0], pts[:, 1]
    for i in range(len(poly) - 1):
        x1, y1 = poly[i]
        x2, y2 = poly[i + 1]
        crosses = (y1 > y) != (y2 > y)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x_cross > x)
    return inside


def sketch_blocking_segments(grid: OccupancyGrid, sketch: Polyline) -> list:
    """Indices of sketch segments that touch a blocking cell (supersampled
    at half-cell steps). Empty list means the sketch is obstacle-free."""
    hits = []
    pts = sketch.pts
    step = grid.resolution / 2
    blocking = {int(c) for c in BLOCKING}
    for i in range(max(1, len(pts)) - 1):
        ax, ay = pts[i]
        bx, by = pts[i + 1]
        seg_len = math.hypot(bx - ax, by - ay)
        n = max(1, int(math.ceil(seg_len / step)))
        for k in range(n + 1):
            t = k / n
            p = Point2(ax + t * (bx - ax), ay + t * (by - ay))
            cls = grid.class_at(p)
            if cls is not None and int(cls) in blocking:
                hits.append(i)
                break
    if len(pts) == 1:
        cls = grid.class_at(Point2(*pts[0]))
        if cls is not None and int(cls) in blocking:
            hits.append(0)
    return hits


# ---------------------------------------------------------------------------
# Map file I/O: PGM raster (P2/P5, maxval 255) + JSON sidecar metadata.

def _parse_pgm(data: bytes):
    """Return (width, height, raster rows top-first) from a P2/P5 PGM."""
    # Tokenize the header, honoring '#' comments.
    tokens = []
    i = 0
    if not data[:2] in (b"P2", b"P5"):
        raise FormatError("not a P2/P5 PGM")
    magic = data[:2].decode()
    i = 2
    while len(tokens) < 3:
        if i >= len(data):
            raise FormatError("truncated PGM header")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise FormatError(f"bad PGM header: {e}") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"PGM maxval must be 255, got {maxval}")
    if magic == "P5":
        i += 1  # single whitespace after maxval
        raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=i)
        if raster.size != width * height:
            raise FormatError("truncated P5 raster")
    else:
        try:
            values = data[i:].split()
            raster = np.array([int(v) for v in values[:width * height]], dtype=np.uint8)
        except ValueError as e:
            raise FormatError(f"bad P2 raster: {e}") from None
        if raster.size != width * height:
            raise FormatError("truncated P2 raster")
    return width, height, raster.reshape(height, width)


def _parse_regions(raw) -> list:
    regions = []
    for entry in raw:
        try:
            poly = Polyline(entry["polygon"])
            regions.append(ConstraintRegion(
                id=str(entry["id"]),
                kind=str(entry["kind"]),
                polygon=poly,
                direction_rad=float(entry["direction_rad"]) if "direction_rad" in entry else None,
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad region entry {entry!r}: {e}") from None
    return regions


def load_map(pgm_bytes: bytes, meta_json: bytes):
    """Parse a PGM + JSON metadata pair into (OccupancyGrid, regions).

    The metadata declares resolution, origin, the gray-value class table,
    and constraint regions. Raises FormatError on malformed input and
    ClassError on undeclared gray values.
    """
    width, height, raster = _parse_pgm(pgm_bytes)
    try:
        meta = json.loads(meta_json.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"bad map JSON: {e}") from None
    try:
        resolution = float(meta["resolution"])
        ox, oy = (float(v) for v in meta["origin"])
        class_table = meta["classes"]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"map JSON missing or malformed field: {e}") from None
    lut = np.full(256, -1, dtype=np.int16)
    for gray_str, name in class_table.items():
        try:
            gray = int(gray_str)
            cls = CellClass[name]
        except (ValueError, KeyError) as e:
            raise ClassError(f"bad class table entry {gray_str!r}: {name!r} ({e})") from None
        if not 0 <= gray <= 255:
            raise ClassError(f"gray value {gray} out of range")
        lut[gray] = int(cls)
    mapped = lut[raster]
    if (mapped < 0).any():
        bad = int(raster[mapped < 0].flat[0])
        raise ClassError(f"gray value {bad} not declared in class table")
    cells = np.flipud(mapped).astype(np.uint8)  # PGM top row -> highest y
    grid = OccupancyGrid(width, height, resolution, Point2(ox, oy), cells)
    regions = _parse_regions(meta.get("regions", []))
    return grid, regions


def save_map(grid: OccupancyGrid, regions: Sequence[ConstraintRegion] = ()):
    """Serialize to (pgm_bytes, meta_json_bytes) with the canonical gray
    table; load_map(save_map(...)) is a fixed point on the cell array."""
    gray_of = np.zeros(256, dtype=np.uint8)
    for cls, gray in DEFAULT_CLASS_GRAY.items():
        gray_of[int(cls)] = gray
    raster = gray_of[np.flipud(grid.cells)]
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode()
    pgm = header + raster.tobytes()
    meta = {
        "resolution": grid.resolution,
        "origin": [grid.origin.x, grid.origin.y],
        "classes": {str(gray): cls.name for cls, gray in DEFAULT_CLASS_GRAY.items()},
        "regions": [
            {
                "id": r.id,
                "kind": r.kind,
                "polygon": r.polygon.tolist(),
                **({"direction_rad": r.direction_rad} if r.direction_rad is not None else {}),
            }
            for r in regions
        ],
    }
    return pgm, json.dumps(meta, sort_keys=True, indent=1).encode()
