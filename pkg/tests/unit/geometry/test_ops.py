"""Unit tests for geometric queries, with independent oracles."""

import math

import numpy as np
import pytest

from app.core.errors import ValidationError
from app.geometry.ops import (
    box_corners,
    extend_straight,
    interpolate_at,
    path_min_distance,
    point_in_polygon,
    point_segment_distances,
    points_in_polygon,
    progress_along,
    project,
    rect_overlap,
    resample_arclength,
    resample_chord,
)
from app.geometry.primitives import DrivablePolygon, Footprint, Polyline, Pose2

CAR = Footprint(4.5, 2.0)


def _inside_rect(points, pose, fp):
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    rel = points - np.array([pose.x, pose.y])
    lx = rel[:, 0] * c + rel[:, 1] * s
    ly = -rel[:, 0] * s + rel[:, 1] * c
    return (np.abs(lx) <= fp.half_length + 1e-12) & (np.abs(ly) <= fp.half_width + 1e-12)


def _boundary_samples(pose, fp, step=0.01):
    corners = box_corners([pose.x, pose.y], pose.heading, fp)
    samples = []
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        n = max(2, int(np.linalg.norm(b - a) / step) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        samples.append(a + t * (b - a))
    return np.vstack(samples)


def _sampling_oracle(a, fa, b, fb):
    return bool(
        _inside_rect(_boundary_samples(a, fa), b, fb).any()
        or _inside_rect(_boundary_samples(b, fb), a, fa).any()
        or _inside_rect(np.array([[a.x, a.y]]), b, fb).any()
    )


def _exact_corners(pose, half_length, half_width):
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    local = [(half_length, half_width), (-half_length, half_width), (-half_length, -half_width), (half_length, -half_width)]
    return [(pose.x + c * lx - s * ly, pose.y + s * lx + c * ly) for lx, ly in local]


def _orient(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _between(o, a, p):
    return min(o[0], a[0]) <= p[0] <= max(o[0], a[0]) and min(o[1], a[1]) <= p[1] <= max(o[1], a[1])


def _segments_touch(p1, p2, q1, q2):
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and 0 not in (d1, d2, d3, d4):
        return True
    return (
        (d1 == 0 and _between(q1, q2, p1))
        or (d2 == 0 and _between(q1, q2, p2))
        or (d3 == 0 and _between(p1, p2, q1))
        or (d4 == 0 and _between(p1, p2, q2))
    )


def _contains(corners, p):
    return all(_orient(corners[i], corners[(i + 1) % 4], p) >= 0 for i in range(4))


def _polygon_oracle(a, fa, b, fb, pad=0.0):
    """Edge crossing or containment of the two rectangles grown by ``pad`` on every side."""
    ca = _exact_corners(a, fa.half_length + pad, fa.half_width + pad)
    cb = _exact_corners(b, fb.half_length + pad, fb.half_width + pad)
    crossing = any(
        _segments_touch(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4])
        for i in range(4)
        for j in range(4)
    )
    return crossing or _contains(cb, ca[0]) or _contains(ca, cb[0])


def _grazing(a, fa, b, fb, band):
    return _polygon_oracle(a, fa, b, fb, band) != _polygon_oracle(a, fa, b, fb, -band)


def _random_pair(rng):
    fa = Footprint(*rng.uniform(1.0, 5.0, size=2))
    fb = Footprint(*rng.uniform(1.0, 5.0, size=2))
    a = Pose2(*rng.uniform(-4, 4, size=2), rng.uniform(-math.pi, math.pi))
    b = Pose2(*rng.uniform(-4, 4, size=2), rng.uniform(-math.pi, math.pi))
    return a, fa, b, fb


def test_identical_boxes_overlap():
    pose = Pose2(1.0, 2.0, 0.3)
    assert rect_overlap(pose, CAR, pose, CAR)


def test_distant_boxes_do_not_overlap():
    five = Footprint(5.0, 5.0)
    assert not rect_overlap(Pose2(0, 0, 0), five, Pose2(100, 0, 0), five)


def test_rect_overlap_agrees_with_exact_polygon_oracle():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(1000):
        a, fa, b, fb = _random_pair(rng)
        got = rect_overlap(a, fa, b, fb)
        assert got == rect_overlap(b, fb, a, fa)
        if _grazing(a, fa, b, fb, 1e-6):
            continue
        assert got == _polygon_oracle(a, fa, b, fb), (a, fa, b, fb)
        checked += 1
    assert checked >= 990


def test_rect_overlap_agrees_with_boundary_sampling_oracle():
    rng = np.random.default_rng(0)
    overlapping = 0
    for _ in range(1000):
        a, fa, b, fb = _random_pair(rng)
        got = rect_overlap(a, fa, b, fb)
        overlapping += got
        if got != _sampling_oracle(a, fa, b, fb):
            # sampled boundaries at 1 cm spacing miss only sub-2 cm contacts
            assert _grazing(a, fa, b, fb, 0.02), (a, fa, b, fb)
    assert 0 < overlapping < 1000


def test_touching_edges_count_as_overlap():
    assert rect_overlap(Pose2(0.0, 0.0, 0.0), CAR, Pose2(4.5, 0.0, 0.0), CAR)
    assert not rect_overlap(Pose2(0.0, 0.0, 0.0), CAR, Pose2(4.5 + 1e-3, 0.0, 0.0), CAR)


def test_rect_overlap_invariant_under_rigid_transform():
    rng = np.random.default_rng(1)
    for _ in range(200):
        a = Pose2(*rng.uniform(-5, 5, size=2), rng.uniform(-3, 3))
        b = Pose2(*rng.uniform(-5, 5, size=2), rng.uniform(-3, 3))
        theta, tx, ty = rng.uniform(-3, 3), *rng.uniform(-50, 50, size=2)
        c, s = math.cos(theta), math.sin(theta)

        def move(p, c=c, s=s, tx=tx, ty=ty, theta=theta):
            return Pose2(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, p.heading + theta)

        assert rect_overlap(a, CAR, b, CAR) == rect_overlap(move(a), CAR, move(b), CAR)


def _ray_cast_oracle(point, vertices):
    x, y = point
    inside = False
    n = len(vertices)
    j = n - 1
    for i in range(n):
        xi, yi = vertices[i]
        xj, yj = vertices[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


L_SHAPE = DrivablePolygon(
    np.array([[0, 0], [10, 0], [10, 4], [4, 4], [4, 10], [0, 10]], dtype=float)
)


def test_centroid_of_convex_polygon_is_inside():
    square = DrivablePolygon(np.array([[0, 0], [4, 0], [4, 4], [0, 4]], dtype=float))
    assert point_in_polygon([2.0, 2.0], square)
    assert not point_in_polygon([8.0, 8.0], square)


def test_boundary_points_count_as_inside():
    assert point_in_polygon([10.0, 2.0], L_SHAPE)
    assert point_in_polygon([4.0, 7.0], L_SHAPE)
    assert point_in_polygon([0.0, 0.0], L_SHAPE)


def test_point_in_polygon_matches_ray_casting_oracle():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-2, 12, size=(1000, 2))
    got = points_in_polygon(pts, L_SHAPE)
    starts, ends = L_SHAPE.edges
    band = point_segment_distances(pts, starts, ends).min(axis=1)
    for p, g, d in zip(pts, got, band, strict=True):
        if d > 1e-6:
            assert g == _ray_cast_oracle(p, L_SHAPE.vertices)


STRAIGHT = Polyline(np.array([[0.0, 0.0], [10.0, 0.0]]))


def test_resample_straight_segment():
    result = resample_arclength(STRAIGHT, 2.0)
    assert not result.short
    np.testing.assert_allclose(result.points[:, 0], [0, 2, 4, 6, 8, 10], atol=1e-12)


def test_resample_spacing_equal_to_length():
    result = resample_arclength(STRAIGHT, 10.0)
    assert len(result.points) == 2


def test_resample_short_path_flags_endpoints():
    result = resample_arclength(STRAIGHT, 12.0)
    assert result.short
    np.testing.assert_array_equal(result.points, STRAIGHT.points)


def test_resample_rejects_non_positive_spacing():
    with pytest.raises(ValidationError):
        resample_arclength(STRAIGHT, 0.0)


def test_resample_smooth_path_keeps_spacing_along_arc():
    t = np.linspace(0, 3 * math.pi, 400)
    path = Polyline(np.stack([5 * t, 3 * np.sin(t)], axis=1))
    result = resample_arclength(path, 2.0)
    stations = project(path, result.points).arclength
    gaps = np.diff(stations)
    np.testing.assert_allclose(gaps[:-1], 2.0, atol=1e-9)
    assert 0 < gaps[-1] <= 2.0 + 1e-9
    assert stations[-1] == pytest.approx(path.length)
    assert abs(stations[-1] - path.length) < 2.0


def test_path_min_distance_cases():
    assert path_min_distance(np.array([[5.0, 0.0]]), STRAIGHT) == 0.0
    long_path = Polyline(np.array([[-100.0, 0.0], [100.0, 0.0]]))
    assert path_min_distance(np.array([[0.0, 3.0], [5.0, 4.0]]), long_path) == pytest.approx(3.0)


def test_path_min_distance_matches_dense_sampling():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        path = Polyline.from_points(np.cumsum(rng.uniform(-3, 3, size=(5, 2)), axis=0))
        traj = rng.uniform(-8, 8, size=(6, 2))
        stations = np.append(np.arange(0.0, path.length, 1e-3), path.length)
        dense = interpolate_at(path, stations)
        oracle = np.min(np.linalg.norm(traj[:, None, :] - dense[None], axis=-1))
        assert path_min_distance(traj, path) == pytest.approx(oracle, abs=1e-3)


def test_path_min_distance_rejects_empty():
    with pytest.raises(ValidationError):
        path_min_distance(np.zeros((0, 2)), STRAIGHT)


def test_progress_along_straight_path():
    assert progress_along(STRAIGHT, [0.0, 0.0]) == 0.0
    assert progress_along(STRAIGHT, [10.0, 0.0]) == pytest.approx(10.0)
    assert progress_along(STRAIGHT, [5.0, 1.0]) == pytest.approx(5.0)


def test_progress_is_monotone_along_sampled_points():
    t = np.linspace(0, math.pi, 50)
    path = Polyline(np.stack([10 * np.cos(t), 10 * np.sin(t)], axis=1))
    samples = interpolate_at(path, np.linspace(0, path.length, 30))
    progress = [progress_along(path, p) for p in samples]
    assert all(b >= a - 1e-9 for a, b in zip(progress, progress[1:], strict=False))


def test_extend_straight_reaches_requested_length():
    pts = extend_straight([[0.0, 0.0], [0.0, 2.0]], 5.0)
    np.testing.assert_allclose(pts[-1], [0.0, 5.0])
    stationary = extend_straight([[1.0, 1.0], [1.0, 1.0]], 3.0)
    np.testing.assert_allclose(stationary[-1], [4.0, 1.0])


def test_resample_chord_gaps_are_exact_on_curves():
    t = np.linspace(0.0, 1.0, 40)
    points = np.column_stack([25.0 * t, 4.0 * np.sin(4.0 * t)])
    out = resample_chord(points, 2.0, 10)
    gaps = np.linalg.norm(np.diff(out, axis=0), axis=1)
    assert np.allclose(gaps, 2.0, atol=1e-9)
    assert np.array_equal(out[0], points[0])
    assert path_min_distance(out, Polyline(points)) < 1e-9


def test_resample_chord_continues_past_path_end():
    out = resample_chord([[0.0, 0.0], [3.0, 0.0]], 2.0, 4)
    assert np.allclose(out, [[0.0, 0.0], [2.0, 0.0], [4.0, 0.0], [6.0, 0.0]])
