import math

import numpy as np
import pytest

from canvas_nav.errors import DegenerateInput
from canvas_nav.geometry import (
    Point2,
    Polyline,
    Pose2,
    cumulative_arclength,
    from_ego_frame,
    normalize_angle,
    polyline_length,
    resample_by_arclength,
    to_ego_frame,
)


def test_normalize_angle_range_and_idempotence():
    rng = np.random.default_rng(0)
    for theta in rng.uniform(-50, 50, 500):
        th = normalize_angle(theta)
        assert -math.pi < th <= math.pi
        assert normalize_angle(th) == th
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)


def test_to_ego_identity_frame():
    p = to_ego_frame(Pose2(0, 0, 0), Point2(1, 0))
    assert (p.x, p.y) == pytest.approx((1, 0))


def test_to_ego_quarter_turn():
    p = to_ego_frame(Pose2(0, 0, math.pi / 2), Point2(0, 1))
    assert (p.x, p.y) == pytest.approx((1, 0), abs=1e-12)


def test_from_ego_half_turn():
    p = from_ego_frame(Pose2(1, 1, math.pi), Point2(1, 0))
    assert (p.x, p.y) == pytest.approx((0, 1), abs=1e-12)


def test_ego_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(300):
        pose = Pose2(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))
        p = Point2(*rng.uniform(-20, 20, 2))
        back = from_ego_frame(pose, to_ego_frame(pose, p))
        assert back.distance_to(p) < 1e-9
        fwd = to_ego_frame(pose, from_ego_frame(pose, p))
        assert fwd.distance_to(p) < 1e-9


def test_ego_matches_inverse_fixed_pose():
    pose = Pose2(2, 3, 0.7)
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = Point2(*rng.uniform(-5, 5, 2))
        assert from_ego_frame(pose, to_ego_frame(pose, p)).distance_to(p) < 1e-9


def test_polyline_length_single_point():
    assert polyline_length(Polyline([(2, 2)])) == 0.0


def test_polyline_length_345():
    assert polyline_length(Polyline([(0, 0), (3, 4)])) == pytest.approx(5.0)


def test_polyline_length_matches_pairwise_sum():
    rng = np.random.default_rng(11)
    pts = rng.uniform(-10, 10, (10, 2))
    expected = sum(math.dist(pts[i], pts[i + 1]) for i in range(9))
    assert polyline_length(Polyline(pts)) == pytest.approx(expected, abs=1e-12)


def test_polyline_rejects_nonfinite():
    with pytest.raises(DegenerateInput):
        Polyline([(0, 0), (math.nan, 1)])


def test_resample_straight_segment():
    line = Polyline([(0, 0), (2, 0)])
    out = resample_by_arclength(line, 0.5)
    assert out.pts.tolist() == [[0, 0], [0.5, 0], [1.0, 0], [1.5, 0], [2.0, 0]]


def test_resample_spacing_longer_than_line():
    line = Polyline([(0, 0), (1, 1)])
    out = resample_by_arclength(line, 5.0)
    assert out.pts.tolist() == [[0, 0], [1, 1]]


def test_resample_closed_square():
    square = Polyline([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
    out = resample_by_arclength(square, 1.0)
    assert out.pts.tolist() == [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]


def _dist_to_polyline(p, pts):
    best = math.inf
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0, 1))
        best = min(best, float(np.hypot(*(a + t * ab - p))))
    return best


def test_resample_vertices_lie_on_curve():
    rng = np.random.default_rng(5)
    for _ in range(30):
        pts = np.cumsum(rng.uniform(-1, 1, (8, 2)), axis=0)
        line = Polyline(pts)
        total = polyline_length(line)
        if total < 0.2:
            continue
        out = resample_by_arclength(line, 0.13)
        for p in out.pts:
            assert _dist_to_polyline(p, line.pts) < 1e-9
        # chord resampling can only shorten a curve, never lengthen it
        assert polyline_length(out) <= total + 1e-9
        # arclength positions are exact: first preserved, last is the endpoint
        assert np.allclose(out.pts[0], line.pts[0])
        assert np.allclose(out.pts[-1], line.pts[-1])


def test_resample_preserves_length_when_straight_between_samples():
    line = Polyline([(0, 0), (1, 0), (1, 3), (-2, 3)])
    out = resample_by_arclength(line, 0.5)
    assert polyline_length(out) == pytest.approx(polyline_length(line), abs=1e-9)
    gaps = np.hypot(*np.diff(out.pts, axis=0).T)
    assert np.allclose(gaps[:-1], 0.5, atol=1e-9)
    assert gaps[-1] <= 0.5 + 1e-9


def test_resample_zero_length_raises():
    with pytest.raises(DegenerateInput):
        resample_by_arclength(Polyline([(1, 1), (1, 1)]), 0.5)
    with pytest.raises(DegenerateInput):
        resample_by_arclength(Polyline([(1, 1)]), 0.5)


def test_cumulative_arclength_monotone():
    line = Polyline([(0, 0), (1, 0), (1, 2), (1, 2), (3, 2)])
    cum = cumulative_arclength(line)
    assert cum[0] == 0
    assert np.all(np.diff(cum) >= 0)
    assert cum[-1] == pytest.approx(5.0)
