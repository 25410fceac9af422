"""Deterministic rasterization of the two policy inputs: the top-down
canvas map (occupancy + sketch + hindsight + robot marker) and the
raycast-synthesized front view.

Rendering is a pure function of its inputs so golden-byte image tests are
valid. Layer order on the canvas is strict: base < sketch < hindsight <
robot marker.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image

from .errors import OutOfBounds
from .geometry import Point2, Polyline, Pose2
from .world import BLOCKING, CellClass, OccupancyGrid, raycast

CANVAS_SIZE = 512
FRONT_W, FRONT_H = 256, 144
FRONT_FOV = math.pi / 2
STROKE_WIDTH_PX = 3
ROBOT_MARKER_PX = 9

SKETCH_RGBA = (255, 0, 0, 255)     # pure red, per the map-annotation convention
HINDSIGHT_RGBA = (0, 0, 255, 255)  # pure blue
ROBOT_RGBA = (0, 200, 0, 255)
LETTERBOX_RGBA = (24, 24, 24, 255)

# One palette table; golden tests depend on these exact values.
CLASS_COLORS = {
    CellClass.Free: (240, 240, 240),
    CellClass.Wall: (40, 40, 40),
    CellClass.Obstacle: (96, 96, 96),
    CellClass.Rock: (139, 115, 85),
    CellClass.Grass: (146, 196, 125),
    CellClass.Road: (120, 120, 130),
    CellClass.Sidewalk: (205, 205, 195),
    CellClass.Crosswalk: (235, 235, 245),
}

SKY_RGB = (170, 205, 235)
FLOOR_FREE_RGB = (225, 225, 220)

# Apparent heights (m) used by the pseudo-3D projection.
CAMERA_HEIGHT = 0.5
BLOCK_HEIGHTS = {CellClass.Wall: 1.0, CellClass.Obstacle: 1.0, CellClass.Rock: 0.3}


@dataclass(frozen=True)
class CanvasTransform:
    """Affine world<->pixel map for the letterboxed canvas."""

    px_per_m: float
    off_x: float
    off_y: float
    size: int = CANVAS_SIZE

    def world_to_px(self, x: float, y: float, origin: Point2):
        px = self.off_x + (x - origin.x) * self.px_per_m
        py = self.size - (self.off_y + (y - origin.y) * self.px_per_m)
        return px, py

    def px_to_world(self, px: float, py: float, origin: Point2):
        x = origin.x + (px - self.off_x) / self.px_per_m
        y = origin.y + (self.size - py - self.off_y) / self.px_per_m
        return x, y

    def to_dict(self) -> dict:
        return {"px_per_m": self.px_per_m, "off_x": self.off_x,
                "off_y": self.off_y, "size": self.size}


def canvas_transform(grid: OccupancyGrid) -> CanvasTransform:
    """Aspect-preserving letterbox of the full map into the square canvas."""
    w_m, h_m = grid.extent_m
    ppm = CANVAS_SIZE / max(w_m, h_m)
    off_x = (CANVAS_SIZE - w_m * ppm) / 2
    off_y = (CANVAS_SIZE - h_m * ppm) / 2
    return CanvasTransform(ppm, off_x, off_y)


@dataclass
class CanvasImage:
    pixels: np.ndarray            # (512, 512, 4) uint8
    meters_per_pixel: float
    transform: CanvasTransform

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


@dataclass
class FrontViewImage:
    pixels: np.ndarray            # (144, 256, 3) uint8
    fov: float = FRONT_FOV

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


def _base_layer(grid: OccupancyGrid, tf: CanvasTransform) -> np.ndarray:
    img = np.empty((CANVAS_SIZE, CANVAS_SIZE, 4), dtype=np.uint8)
    img[:] = LETTERBOX_RGBA
    lut = np.zeros((256, 3), dtype=np.uint8)
    for cls, rgb in CLASS_COLORS.items():
        lut[int(cls)] = rgb
    # pixel centers -> world -> cell indices
    px = np.arange(CANVAS_SIZE) + 0.5
    wx = grid.origin.x + (px - tf.off_x) / tf.px_per_m
    wy = grid.origin.y + (CANVAS_SIZE - px - tf.off_y) / tf.px_per_m
    cols = np.floor((wx - grid.origin.x) / grid.resolution).astype(int)
    rows = np.floor((wy - grid.origin.y) / grid.resolution).astype(int)
    valid_c = (cols >= 0) & (cols < grid.width)
    valid_r = (rows >= 0) & (rows < grid.height)
    sel_c = np.clip(cols, 0, grid.width - 1)
    sel_r = np.clip(rows, 0, grid.height - 1)
    block = lut[grid.cells[np.ix_(sel_r, sel_c)]]
    mask = valid_r[:, None] & valid_c[None, :]
    img[mask, :3] = block[mask]
    return img


def _paint_capsule(img: np.ndarray, x0: float, y0: float, x1: float, y1: float,
                   radius: float, rgba):
    """Paint pixels whose center lies within `radius` of the segment, by
    sweeping small local windows along it (exact capsule coverage)."""
    seg_len = math.hypot(x1 - x0, y1 - y0)
    dx, dy = x1 - x0, y1 - y0
    denom = seg_len * seg_len
    r2 = radius * radius
    reach = int(math.ceil(radius)) + 1
    steps = max(1, int(math.ceil(seg_len)))
    h, w = img.shape[:2]
    seen_rows = set()
    for k in range(steps + 1):
        t = k / steps
        cx = x0 + t * dx
        cy = y0 + t * dy
        for y in range(max(0, int(cy) - reach), min(h - 1, int(cy) + reach) + 1):
            for x in range(max(0, int(cx) - reach), min(w - 1, int(cx) + reach) + 1):
                if (x, y) in seen_rows:
                    continue
                px, py = x + 0.5, y + 0.5
                if denom > 0:
                    u = ((px - x0) * dx + (py - y0) * dy) / denom
                    u = 0.0 if u < 0 else 1.0 if u > 1 else u
                else:
                    u = 0.0
                qx = x0 + u * dx
                qy = y0 + u * dy
                if (px - qx) ** 2 + (py - qy) ** 2 <= r2:
                    img[y, x] = rgba
                    seen_rows.add((x, y))


def _draw_polyline(img: np.ndarray, line: Polyline, grid: OccupancyGrid,
                   tf: CanvasTransform, rgba, width_px: float = STROKE_WIDTH_PX):
    radius = width_px / 2
    pts = line.pts
    if len(pts) == 1:
        x0, y0 = tf.world_to_px(pts[0][0], pts[0][1], grid.origin)
        _paint_capsule(img, x0, y0, x0, y0, radius, rgba)
        return
    for i in range(len(pts) - 1):
        x0, y0 = tf.world_to_px(pts[i][0], pts[i][1], grid.origin)
        x1, y1 = tf.world_to_px(pts[i + 1][0], pts[i + 1][1], grid.origin)
        _paint_capsule(img, x0, y0, x1, y1, radius, rgba)


def _draw_robot_marker(img: np.ndarray, pose: Pose2, grid: OccupancyGrid, tf: CanvasTransform):
    cx, cy = tf.world_to_px(pose.x, pose.y, grid.origin)
    half = ROBOT_MARKER_PX / 2
    # triangle: tip along heading, two base corners behind
    tip = (cx + half * math.cos(pose.heading), cy - half * math.sin(pose.heading))
    base_angle = pose.heading + math.pi
    spread = 2.4
    b1 = (cx + half * math.cos(base_angle + spread) , cy - half * math.sin(base_angle + spread))
    b2 = (cx + half * math.cos(base_angle - spread), cy - half * math.sin(base_angle - spread))
    xs = [tip[0], b1[0], b2[0]]
    ys = [tip[1], b1[1], b2[1]]
    x0, x1 = int(math.floor(min(xs))), int(math.ceil(max(xs)))
    y0, y1 = int(math.floor(min(ys))), int(math.ceil(max(ys)))

    def sign(px, py, ax, ay, bx, by):
        return (px - ax) * (by - ay) - (py - ay) * (bx - ax)

    for y in range(max(0, y0), min(img.shape[0] - 1, y1) + 1):
        for x in range(max(0, x0), min(img.shape[1] - 1, x1) + 1):
            px, py = x + 0.5, y + 0.5
            d1 = sign(px, py, *tip, *b1)
            d2 = sign(px, py, *b1, *b2)
            d3 = sign(px, py, *b2, *tip)
            neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
            pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
            if not (neg and pos):
                img[y, x] = ROBOT_RGBA


def render_canvas(grid: OccupancyGrid, sketch: Optional[Polyline] = None,
                  hindsight: Optional[Polyline] = None,
                  robot: Optional[Pose2] = None) -> CanvasImage:
    """Compose the canvas map: palette base, red sketch, blue hindsight,
    green robot marker, in that strict order."""
    tf = canvas_transform(grid)
    img = _base_layer(grid, tf)
    if sketch is not None and len(sketch) > 0:
        _draw_polyline(img, sketch, grid, tf, SKETCH_RGBA)
    if hindsight is not None and len(hindsight) > 0:
        _draw_polyline(img, hindsight, grid, tf, HINDSIGHT_RGBA)
    if robot is not None:
        _draw_robot_marker(img, robot, grid, tf)
    return CanvasImage(img, 1.0 / tf.px_per_m, tf)


def render_front_view(grid: OccupancyGrid, pose: Pose2, max_range: float = 20.0) -> FrontViewImage:
    """Column raycaster over a 90 degree FOV with fisheye correction
    (perpendicular distance), floor bands for walkable classes, sky above."""
    if not grid.in_bounds(pose.position):
        raise OutOfBounds(f"camera pose {pose} outside grid")
    img = np.empty((FRONT_H, FRONT_W, 3), dtype=np.uint8)
    img[:] = SKY_RGB
    focal = (FRONT_W / 2) / math.tan(FRONT_FOV / 2)
    cy = FRONT_H / 2
    lut = np.zeros((256, 3), dtype=np.uint8)
    for cls, rgb in CLASS_COLORS.items():
        lut[int(cls)] = rgb

    # floor: for each row below the horizon, the ground distance it shows
    rows = np.arange(int(cy) + 1, FRONT_H)
    floor_d_perp = focal * CAMERA_HEIGHT / (rows + 0.5 - cy)

    hits = []
    for i in range(FRONT_W):
        sx = (2.0 * (i + 0.5) / FRONT_W - 1.0) * math.tan(FRONT_FOV / 2)
        offset = math.atan(sx)
        ray_angle = pose.heading - offset
        d_hit, cls = raycast(grid, pose.position, ray_angle, max_range)
        hits.append((d_hit, cls, offset, ray_angle))

    for i, (d_hit, cls, offset, ray_angle) in enumerate(hits):
        cos_off = math.cos(offset)
        d_perp = max(d_hit * cos_off, 1e-6)
        # floor pixels closer than the wall
        visible = floor_d_perp < d_perp
        if visible.any():
            d_ray = floor_d_perp[visible] / cos_off
            gx = pose.x + d_ray * math.cos(ray_angle)
            gy = pose.y + d_ray * math.sin(ray_angle)
            cols_idx = np.floor((gx - grid.origin.x) / grid.resolution).astype(int)
            rows_idx = np.floor((gy - grid.origin.y) / grid.resolution).astype(int)
            inside = ((cols_idx >= 0) & (cols_idx < grid.width) &
                      (rows_idx >= 0) & (rows_idx < grid.height))
            colors = np.empty((int(visible.sum()), 3), dtype=np.uint8)
            colors[:] = FLOOR_FREE_RGB
            if inside.any():
                cells = grid.cells[rows_idx[inside], cols_idx[inside]]
                colors[inside] = lut[cells]
                # blocked classes on the floor read as free floor color
                blocked = np.isin(cells, [int(c) for c in BLOCKING])
                sub = colors[inside]
                sub[blocked] = FLOOR_FREE_RGB
                colors[inside] = sub
            img[rows[visible], i] = colors
        if cls is not None:
            block_h = BLOCK_HEIGHTS.get(cls, 1.0)
            top = cy - focal * (block_h - CAMERA_HEIGHT) / d_perp
            bottom = cy + focal * CAMERA_HEIGHT / d_perp
            y0 = max(0, int(math.floor(top)))
            y1 = min(FRONT_H - 1, int(math.ceil(bottom)) - 1)
            if y1 >= y0:
                img[y0:y1 + 1, i] = CLASS_COLORS[cls]
    return FrontViewImage(img)


def encode_png(image) -> bytes:
    """PNG bytes with fixed settings; identical pixels give identical bytes."""
    arr = image.pixels if hasattr(image, "pixels") else np.asarray(image)
    mode = "RGBA" if arr.shape[2] == 4 else "RGB"
    pil = Image.fromarray(arr, mode)
    buf = io.BytesIO()
    pil.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.array(im)
