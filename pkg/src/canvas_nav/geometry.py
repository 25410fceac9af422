"""Planar geometry primitives: points, poses, polylines, frame transforms.

World frame: meters, +x east, +y north, headings in radians CCW from +x,
normalized to (-pi, pi]. Ego frame: +x forward, +y left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInput

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    th = math.remainder(theta, TWO_PI)
    if th <= -math.pi:
        th += TWO_PI
    return th


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DegenerateInput(f"non-finite point ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise DegenerateInput("non-finite pose")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))

    @property
    def position(self) -> Point2:
        return Point2(self.x, self.y)

    def moved(self, x: float, y: float, heading: float) -> "Pose2":
        return Pose2(x, y, heading)


class Polyline:
    """Ordered sequence of world- or ego-frame points, length >= 1.

    Backed by an (N, 2) float array. Consecutive duplicate points are
    permitted; coordinates must be finite.
    """

    __slots__ = ("pts",)

    def __init__(self, points: Iterable):
        arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
        if arr.ndim == 1 and arr.size == 2:
            arr = arr.reshape(1, 2)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
            raise DegenerateInput(f"polyline needs an (N,2) point array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DegenerateInput("polyline contains non-finite coordinates")
        self.pts = arr

    @classmethod
    def from_points(cls, points: Sequence[Point2]) -> "Polyline":
        return cls([(p.x, p.y) for p in points])

    def __len__(self) -> int:
        return self.pts.shape[0]

    def __getitem__(self, i) -> Point2:
        x, y = self.pts[i]
        return Point2(float(x), float(y))

    def __iter__(self):
        for x, y in self.pts:
            yield Point2(float(x), float(y))

    def __eq__(self, other) -> bool:
        return isinstance(other, Polyline) and self.pts.shape == other.pts.shape and np.array_equal(self.pts, other.pts)

    def append(self, p: Point2) -> None:
        self.pts = np.vstack([self.pts, [p.x, p.y]])

    def first(self) -> Point2:
        return self[0]

    def last(self) -> Point2:
        return self[-1]

    def tolist(self):
        return [[float(x), float(y)] for x, y in self.pts]

    def __repr__(self):
        return f"Polyline({len(self)} pts, {polyline_length(self):.3f} m)"


def polyline_length(line: Polyline) -> float:
    """Total Euclidean arclength; 0 for single-point lines."""
    if len(line) < 2:
        return 0.0
    deltas = np.diff(line.pts, axis=0)
    return float(np.sum(np.hypot(deltas[:, 0], deltas[:, 1])))


def cumulative_arclength(line: Polyline) -> np.ndarray:
    """Arclength at each vertex, starting at 0."""
    if len(line) < 2:
        return np.zeros(len(line))
    deltas = np.diff(line.pts, axis=0)
    return np.concatenate([[0.0], np.cumsum(np.hypot(deltas[:, 0], deltas[:, 1]))])


def point_at_arclength(line: Polyline, s: float) -> Point2:
    """Point on the polyline at arclength s, clamped to [0, length]."""
    cum = cumulative_arclength(line)
    s = min(max(s, 0.0), float(cum[-1]))
    x = float(np.interp(s, cum, line.pts[:, 0]))
    y = float(np.interp(s, cum, line.pts[:, 1]))
    return Point2(x, y)


def resample_by_arclength(line: Polyline, spacing: float) -> Polyline:
    """Resample so consecutive points sit exactly `spacing` apart along the
    curve, except the final point which is the original endpoint.

    Output vertices lie on the input polyline; the first point is preserved.
    Raises DegenerateInput when the total length is 0.
    """
    if spacing <= 0:
        raise DegenerateInput(f"spacing must be > 0, got {spacing}")
    cum = cumulative_arclength(line)
    total = float(cum[-1]) if len(cum) else 0.0
    if len(line) < 2 or total <= 0.0:
        raise DegenerateInput("cannot resample a zero-length polyline")
    # Sample points strictly before the end, then close with the endpoint.
    n = int(math.floor((total - 1e-9) / spacing))
    targets = np.arange(n + 1) * spacing
    xs = np.interp(targets, cum, line.pts[:, 0])
    ys = np.interp(targets, cum, line.pts[:, 1])
    out = np.column_stack([xs, ys])
    out = np.vstack([out, line.pts[-1]])
    return Polyline(out)


def to_ego_frame(pose: Pose2, p: Point2) -> Point2:
    """Express world point p in the frame where pose is the origin,
    +x = heading direction, +y = left."""
    dx = p.x - pose.x
    dy = p.y - pose.y
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    return Point2(c * dx + s * dy, -s * dx + c * dy)


def from_ego_frame(pose: Pose2, p_ego: Point2) -> Point2:
    """Inverse of to_ego_frame for the same pose."""
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    return Point2(pose.x + c * p_ego.x - s * p_ego.y,
                  pose.y + s * p_ego.x + c * p_ego.y)


def to_ego_frame_many(pose: Pose2, pts: np.ndarray) -> np.ndarray:
    """Vectorized to_ego_frame over an (N,2) array."""
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    d = np.asarray(pts, dtype=float) - [pose.x, pose.y]
    return np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])


def from_ego_frame_many(pose: Pose2, pts: np.ndarray) -> np.ndarray:
    """Vectorized from_ego_frame over an (N,2) array."""
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    p = np.asarray(pts, dtype=float)
    return np.column_stack([pose.x + c * p[:, 0] - s * p[:, 1],
                            pose.y + s * p[:, 0] + c * p[:, 1]])


def bearing(origin: Point2, target: Point2) -> float:
    """World-frame angle of the vector origin -> target."""
    return math.atan2(target.y - origin.y, target.x - origin.x)
