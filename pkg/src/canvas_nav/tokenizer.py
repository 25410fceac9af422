"""K-means waypoint codebook: fit/encode/decode plus supervision-target
extraction from demonstration trajectories.

Waypoints are clustered jointly in the ego frame (x forward, y left), one
token per 2D waypoint; actions are fixed 4-token groups.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
import numpy as np

from .errors import DegenerateInput, InsufficientData, TokenOutOfRange
from .geometry import (
    Point2,
    Polyline,
    Pose2,
    cumulative_arclength,
    resample_by_arclength,
    to_ego_frame_many,
)

DEFAULT_K = 128
WAYPOINT_SPACING = 0.5
ACTION_HORIZON = 4


@dataclass(frozen=True)
class WaypointCodebook:
    K: int
    centroids: np.ndarray        # (K, 2) ego-frame meters
    fit_seed: int
    max_radius: float            # max train-point distance to its centroid

    def __post_init__(self):
        if self.K < 1 or self.centroids.shape != (self.K, 2):
            raise ValueError(f"bad codebook shape {self.centroids.shape} for K={self.K}")

    def to_json(self) -> str:
        return json.dumps({
            "K": self.K,
            "seed": self.fit_seed,
            "max_radius": self.max_radius,
            "centroids": [[float(x), float(y)] for x, y in self.centroids],
        }, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "WaypointCodebook":
        data = json.loads(text)
        return cls(int(data["K"]), np.array(data["centroids"], dtype=float),
                   int(data["seed"]), float(data["max_radius"]))


@dataclass(frozen=True)
class ActionTokens:
    tokens: tuple

    def __post_init__(self):
        if len(self.tokens) != ACTION_HORIZON:
            raise ValueError(f"actions carry exactly {ACTION_HORIZON} tokens")

    def __iter__(self):
        return iter(self.tokens)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, 2))
    centroids[0] = points[rng.integers(n)]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i] = points[rng.integers(n)]
        else:
            probs = d2 / total
            centroids[i] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def _assign(points: np.ndarray, centroids: np.ndarray):
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties
    return labels, d2[np.arange(len(points)), labels]


def fit_codebook(waypoints, K: int = DEFAULT_K, seed: int = 0,
                 max_iter: int = 100, tol: float = 1e-6) -> WaypointCodebook:
    """Lloyd's algorithm with k-means++ seeding; deterministic per seed.

    Empty clusters are repaired by reseeding at the point farthest from its
    assigned centroid. Converges when the max centroid shift drops below
    `tol` meters. Raises InsufficientData when len(waypoints) < K.
    """
    points = np.asarray([(p.x, p.y) if isinstance(p, Point2) else tuple(p) for p in waypoints],
                        dtype=float)
    if len(points) < K:
        raise InsufficientData(f"need >= {K} waypoints, got {len(points)}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, K, rng)
    prev_inertia = math.inf
    for _ in range(max_iter):
        labels, d2 = _assign(points, centroids)
        reseeded = False
        for k in range(K):
            if not np.any(labels == k):
                far = int(np.argmax(d2))
                centroids[k] = points[far]
                labels, d2 = _assign(points, centroids)
                reseeded = True
        inertia = float(d2.sum())
        if not reseeded:
            assert inertia <= prev_inertia + 1e-9, "inertia increased during Lloyd iteration"
        prev_inertia = inertia
        new_centroids = centroids.copy()
        for k in range(K):
            members = points[labels == k]
            if len(members):
                new_centroids[k] = members.mean(axis=0)
        shift = float(np.max(np.hypot(*(new_centroids - centroids).T)))
        centroids = new_centroids
        if shift < tol:
            break
    _, d2 = _assign(points, centroids)
    return WaypointCodebook(K, centroids, int(seed), float(np.sqrt(d2.max())))


def inertia_of(cb: WaypointCodebook, waypoints) -> float:
    points = np.asarray([(p.x, p.y) if isinstance(p, Point2) else tuple(p) for p in waypoints],
                        dtype=float)
    _, d2 = _assign(points, cb.centroids)
    return float(d2.sum())


def encode(cb: WaypointCodebook, w) -> int:
    """Nearest-centroid token id; ties break to the lowest id."""
    p = (w.x, w.y) if isinstance(w, Point2) else (float(w[0]), float(w[1]))
    d2 = np.sum((cb.centroids - p) ** 2, axis=1)
    return int(np.argmin(d2))


def decode(cb: WaypointCodebook, token: int) -> Point2:
    if not 0 <= token < cb.K:
        raise TokenOutOfRange(f"token {token} outside [0, {cb.K})")
    x, y = cb.centroids[token]
    return Point2(float(x), float(y))


def _tangent_heading(pts: np.ndarray, i: int) -> float:
    """Local tangent smoothed over +-1 sample; one-sided at the ends."""
    lo = max(0, i - 1)
    hi = min(len(pts) - 1, i + 1)
    dx, dy = pts[hi] - pts[lo]
    if dx == 0 and dy == 0:
        return 0.0
    return math.atan2(dy, dx)


@dataclass(frozen=True)
class SupervisionStep:
    """One labeled action: the ego frame it was expressed in, the continuous
    ego waypoints, their tokens, and the demo prefix behind it."""

    tick: int
    start_pose: Pose2
    ego_waypoints: np.ndarray        # (4, 2)
    tokens: ActionTokens
    hindsight: Polyline              # tick-aligned past positions, start included


def iter_supervision_groups(demo: Polyline, spacing: float = WAYPOINT_SPACING,
                            horizon: int = ACTION_HORIZON):
    """Resample the demo and yield (tick, start_pose, world_waypoints,
    hindsight) per non-overlapping `horizon`-waypoint group. The final
    partial group is padded with the demo endpoint (stop behavior)."""
    cum = cumulative_arclength(demo)
    if len(demo) < 2 or cum[-1] < spacing:
        raise DegenerateInput(f"demo shorter than one waypoint spacing ({spacing} m)")
    resampled = resample_by_arclength(demo, spacing)
    pts = resampled.pts
    # Drop a final sample that the endpoint-append made redundant.
    if len(pts) >= 2 and math.dist(pts[-1], pts[-2]) < 1e-9:
        pts = pts[:-1]
    tick = 0
    start = 0
    while start + 1 < len(pts):
        group = pts[start + 1:start + 1 + horizon]
        if len(group) < horizon:
            pad = np.repeat(pts[-1][None, :], horizon - len(group), axis=0)
            group = np.vstack([group, pad])
        heading = _tangent_heading(pts, start)
        pose = Pose2(float(pts[start][0]), float(pts[start][1]), heading)
        hindsight = Polyline(pts[:start + 1])
        yield tick, pose, group, hindsight
        tick += 1
        start += horizon


def extract_supervision(demo: Polyline, cb: WaypointCodebook,
                        spacing: float = WAYPOINT_SPACING,
                        horizon: int = ACTION_HORIZON) -> list:
    """Turn a demonstration into per-tick (ego waypoints, token) labels.

    Each group is re-expressed in the ego frame of its starting pose
    (heading = local tangent) and encoded through the codebook."""
    steps = []
    for tick, pose, group, hindsight in iter_supervision_groups(demo, spacing, horizon):
        ego = to_ego_frame_many(pose, group)
        tokens = ActionTokens(tuple(encode(cb, w) for w in ego))
        steps.append(SupervisionStep(tick, pose, ego, tokens, hindsight))
    return steps
