"""Planar value types: poses, footprints, polylines and the drivable polygon."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from app.core.errors import ValidationError

Points = npt.NDArray[np.float64]

MIN_SEPARATION = 1e-9


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def wrap_angles(angles: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Vectorized ``wrap_angle``."""
    wrapped = np.fmod(np.asarray(angles, dtype=np.float64) + math.pi, 2.0 * math.pi)
    wrapped = np.where(wrapped <= 0.0, wrapped + 2.0 * math.pi, wrapped)
    return wrapped - math.pi


def _as_points(points: Any, what: str) -> Points:
    arr = np.array(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"{what} must be an (n, 2) array", details={"shape": list(arr.shape)})
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite coordinates")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @property
    def position(self) -> Points:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Footprint:
    length: float
    width: float

    def __post_init__(self) -> None:
        if not (self.length > 0 and self.width > 0):
            raise ValidationError(
                "footprint extents must be positive",
                details={"length": self.length, "width": self.width},
            )

    @property
    def half_width(self) -> float:
        return 0.5 * self.width

    @property
    def half_length(self) -> float:
        return 0.5 * self.length


@dataclass(frozen=True, eq=False)
class Polyline:
    """Ordered path of at least two distinct consecutive points."""

    points: Points
    _cumulative: Points = field(init=False, repr=False)

    def __post_init__(self) -> None:
        pts = _as_points(self.points, "polyline")
        if len(pts) < 2:
            raise ValidationError("polyline needs at least two points")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg <= MIN_SEPARATION):
            raise ValidationError("polyline has coincident consecutive points")
        cumulative = np.concatenate([[0.0], np.cumsum(seg)])
        cumulative.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_cumulative", cumulative)

    @classmethod
    def from_points(cls, points: Any) -> Polyline:
        """Build a polyline, dropping consecutive duplicates first."""
        pts = np.array(points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 0:
            raise ValidationError("polyline needs at least two points")
        keep = [0]
        for i in range(1, len(pts)):
            if np.linalg.norm(pts[i] - pts[keep[-1]]) > MIN_SEPARATION:
                keep.append(i)
        return cls(pts[keep])

    @property
    def length(self) -> float:
        return float(self._cumulative[-1])

    @property
    def cumulative(self) -> Points:
        return self._cumulative

    @property
    def start(self) -> Points:
        return self.points[0]

    @property
    def end(self) -> Points:
        return self.points[-1]

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polyline):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    __hash__ = None  # type: ignore[assignment]


def signed_area(vertices: Points) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1: Points, p2: Points, q1: Points, q2: Points) -> bool:
    def orient(a: Points, b: Points, c: Points) -> float:
        return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    def on_segment(a: Points, b: Points, c: Points) -> bool:
        return bool(
            min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return (
        (d1 == 0 and on_segment(q1, q2, p1))
        or (d2 == 0 and on_segment(q1, q2, p2))
        or (d3 == 0 and on_segment(p1, p2, q1))
        or (d4 == 0 and on_segment(p1, p2, q2))
    )


def is_simple(vertices: Points) -> bool:
    n = len(vertices)
    for i in range(n):
        a1, a2 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(a1, a2, vertices[j], vertices[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True, eq=False)
class DrivablePolygon:
    """Simple counterclockwise polygon bounding the drivable surface."""

    vertices: Points

    def __post_init__(self) -> None:
        verts = _as_points(self.vertices, "drivable polygon")
        if len(verts) < 3:
            raise ValidationError("drivable polygon needs at least three vertices")
        area = signed_area(verts)
        if area <= 0:
            raise ValidationError(
                "drivable polygon must be counterclockwise with positive area",
                details={"signed_area": area},
            )
        if not is_simple(verts):
            raise ValidationError("drivable polygon is self-intersecting")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def counterclockwise(cls, vertices: Any) -> DrivablePolygon:
        """Build a polygon, reversing clockwise input."""
        verts = np.array(vertices, dtype=np.float64)
        if len(verts) >= 3 and signed_area(verts) < 0:
            verts = verts[::-1]
        return cls(verts)

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @property
    def edges(self) -> tuple[Points, Points]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DrivablePolygon):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices)

    __hash__ = None  # type: ignore[assignment]
