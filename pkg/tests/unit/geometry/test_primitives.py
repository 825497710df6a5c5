"""Unit tests for planar value types."""

import math

import numpy as np
import pytest

from app.core.errors import ValidationError
from app.geometry.primitives import (
    DrivablePolygon,
    Footprint,
    Polyline,
    Pose2,
    wrap_angle,
    wrap_angles,
)


@pytest.mark.parametrize(
    ("angle", "expected"),
    [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi, math.pi), (-0.5, -0.5)],
)
def test_wrap_angle_into_half_open_interval(angle, expected):
    assert wrap_angle(angle) == pytest.approx(expected, abs=1e-12)


def test_wrap_angles_matches_scalar_version():
    angles = np.linspace(-10, 10, 41)
    np.testing.assert_allclose(wrap_angles(angles), [wrap_angle(a) for a in angles], atol=1e-12)


def test_pose_heading_is_normalized():
    pose = Pose2(1.0, 2.0, 2 * math.pi + 0.25)
    assert pose.heading == pytest.approx(0.25)


@pytest.mark.parametrize(("length", "width"), [(0.0, 1.0), (4.0, -1.0)])
def test_footprint_rejects_non_positive_extents(length, width):
    with pytest.raises(ValidationError):
        Footprint(length, width)


def test_polyline_requires_distinct_points():
    with pytest.raises(ValidationError):
        Polyline(np.array([[0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        Polyline(np.array([[0.0, 0.0]]))


def test_polyline_from_points_drops_duplicates():
    path = Polyline.from_points([[0, 0], [0, 0], [3, 4], [3, 4]])
    assert len(path) == 2
    assert path.length == pytest.approx(5.0)


def test_polyline_equality_is_bitwise():
    a = Polyline(np.array([[0.0, 0.0], [1.0, 0.0]]))
    b = Polyline(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert a == b
    assert a != Polyline(np.array([[0.0, 0.0], [1.0, 1e-12]]))


def test_drivable_polygon_requires_counterclockwise():
    square = [[0, 0], [1, 0], [1, 1], [0, 1]]
    assert DrivablePolygon(np.array(square, dtype=float)).area == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        DrivablePolygon(np.array(square[::-1], dtype=float))
    assert DrivablePolygon.counterclockwise(square[::-1]).area == pytest.approx(1.0)


def test_drivable_polygon_rejects_self_intersection():
    bowtie = np.array([[0, 0], [2, 2], [2, 0], [0, 2]], dtype=float)
    with pytest.raises(ValidationError):
        DrivablePolygon.counterclockwise(bowtie)


def test_drivable_polygon_rejects_degenerate():
    with pytest.raises(ValidationError):
        DrivablePolygon(np.array([[0, 0], [1, 0], [2, 0]], dtype=float))
