"""Geometric queries used by selection, reward scoring and the simulator.

All functions are pure and vectorized with numpy over point sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.core.errors import ValidationError
from app.geometry.primitives import (
    MIN_SEPARATION,
    DrivablePolygon,
    Footprint,
    Points,
    Polyline,
    Pose2,
)

BOUNDARY_TOLERANCE = 1e-9
RESIDUAL_TOLERANCE = 1e-9


# -- oriented rectangles ----------------------------------------------------


def box_corners(
    centers: npt.ArrayLike,
    headings: npt.ArrayLike,
    footprint: Footprint,
) -> Points:
    """Corners of oriented rectangles, shape ``(..., 4, 2)`` counterclockwise."""
    centers = np.asarray(centers, dtype=np.float64)
    headings = np.asarray(headings, dtype=np.float64)
    c, s = np.cos(headings)[..., None], np.sin(headings)[..., None]
    local = np.array(
        [
            [footprint.half_length, footprint.half_width],
            [-footprint.half_length, footprint.half_width],
            [-footprint.half_length, -footprint.half_width],
            [footprint.half_length, -footprint.half_width],
        ]
    )
    x = c * local[:, 0] - s * local[:, 1]
    y = s * local[:, 0] + c * local[:, 1]
    return np.stack([x, y], axis=-1) + centers[..., None, :]


def boxes_overlap(
    centers_a: npt.ArrayLike,
    headings_a: npt.ArrayLike,
    footprint_a: Footprint,
    centers_b: npt.ArrayLike,
    headings_b: npt.ArrayLike,
    footprint_b: Footprint,
) -> npt.NDArray[np.bool_]:
    """Separating-axis overlap test broadcast over leading axes; touching counts."""
    corners_a = box_corners(centers_a, headings_a, footprint_a)
    corners_b = box_corners(centers_b, headings_b, footprint_b)
    corners_a, corners_b = np.broadcast_arrays(corners_a, corners_b)
    ha = np.asarray(headings_a, dtype=np.float64)
    hb = np.asarray(headings_b, dtype=np.float64)
    ha, hb = np.broadcast_arrays(ha, hb)
    axes = np.stack(
        [
            np.stack([np.cos(ha), np.sin(ha)], axis=-1),
            np.stack([-np.sin(ha), np.cos(ha)], axis=-1),
            np.stack([np.cos(hb), np.sin(hb)], axis=-1),
            np.stack([-np.sin(hb), np.cos(hb)], axis=-1),
        ],
        axis=-2,
    )  # (..., 4 axes, 2)
    proj_a = np.einsum("...kd,...cd->...kc", axes, corners_a)
    proj_b = np.einsum("...kd,...cd->...kc", axes, corners_b)
    separated = (proj_a.max(axis=-1) < proj_b.min(axis=-1)) | (
        proj_b.max(axis=-1) < proj_a.min(axis=-1)
    )
    return ~np.any(separated, axis=-1)


def rect_overlap(a: Pose2, footprint_a: Footprint, b: Pose2, footprint_b: Footprint) -> bool:
    """True iff the two oriented rectangles intersect."""
    return bool(
        boxes_overlap(
            [a.x, a.y], a.heading, footprint_a, [b.x, b.y], b.heading, footprint_b
        )
    )


# -- polygon containment ----------------------------------------------------


def point_segment_distances(points: npt.ArrayLike, starts: Points, ends: Points) -> Points:
    """Distance matrix ``(n_points, n_segments)`` from points to segments."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    d = ends - starts
    denom = np.maximum(np.einsum("sd,sd->s", d, d), MIN_SEPARATION**2)
    rel = p[:, None, :] - starts[None, :, :]
    t = np.clip(np.einsum("psd,sd->ps", rel, d) / denom, 0.0, 1.0)
    closest = starts[None, :, :] + t[..., None] * d[None, :, :]
    return np.linalg.norm(p[:, None, :] - closest, axis=-1)


def points_in_polygon(points: npt.ArrayLike, polygon: DrivablePolygon) -> npt.NDArray[np.bool_]:
    """Crossing-number containment; points within 1e-9 m of an edge are inside."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    starts, ends = polygon.edges
    on_boundary = point_segment_distances(p, starts, ends).min(axis=1) <= BOUNDARY_TOLERANCE

    x, y = p[:, 0:1], p[:, 1:2]
    x1, y1 = starts[None, :, 0], starts[None, :, 1]
    x2, y2 = ends[None, :, 0], ends[None, :, 1]
    straddles = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    crossings = np.sum(straddles & (x < x_cross), axis=1)
    return on_boundary | (crossings % 2 == 1)


def point_in_polygon(point: npt.ArrayLike, polygon: DrivablePolygon) -> bool:
    return bool(points_in_polygon(np.asarray(point).reshape(1, 2), polygon)[0])


# -- paths -------------------------------------------------------------------


@dataclass(frozen=True)
class ResampledPath:
    points: Points
    short: bool


def interpolate_at(path: Polyline, arclengths: npt.ArrayLike) -> Points:
    """Points at the given arc-length coordinates (clamped to the path)."""
    s = np.clip(np.asarray(arclengths, dtype=np.float64), 0.0, path.length)
    cum = path.cumulative
    seg = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    frac = (s - cum[seg]) / (cum[seg + 1] - cum[seg])
    return path.points[seg] + frac[..., None] * (path.points[seg + 1] - path.points[seg])


def resample_arclength(path: Polyline, spacing: float) -> ResampledPath:
    """Sample at multiples of ``spacing`` from the start, plus any final residual.

    A path shorter than ``spacing`` yields its two endpoints with ``short`` set.
    """
    if spacing <= 0:
        raise ValidationError("spacing must be positive", details={"spacing": spacing})
    total = path.length
    if total < spacing - RESIDUAL_TOLERANCE:
        return ResampledPath(np.stack([path.start, path.end]), short=True)
    count = int(math.floor(total / spacing + RESIDUAL_TOLERANCE))
    stations = spacing * np.arange(count + 1)
    stations[-1] = min(stations[-1], total)
    points = interpolate_at(path, stations)
    if total - stations[-1] > RESIDUAL_TOLERANCE:
        points = np.vstack([points, path.end])
    return ResampledPath(points, short=False)


def extend_straight(points: npt.ArrayLike, min_length: float) -> Points:
    """Extend a point sequence along its final direction until it spans ``min_length``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = float(seg.sum())
    if total >= min_length:
        return pts
    moving = np.nonzero(seg > MIN_SEPARATION)[0]
    if len(moving):
        last = moving[-1]
        direction = (pts[last + 1] - pts[last]) / seg[last]
    else:
        direction = np.array([1.0, 0.0])
    return np.vstack([pts, pts[-1] + direction * (min_length - total)])


@dataclass(frozen=True)
class Projection:
    distance: npt.NDArray[np.float64]
    arclength: npt.NDArray[np.float64]
    tangent: Points


def project(path: Polyline, points: npt.ArrayLike) -> Projection:
    """Closest projection of each point onto the path (first segment on ties)."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    starts, ends = path.points[:-1], path.points[1:]
    d = ends - starts
    seg_len = np.linalg.norm(d, axis=1)
    rel = p[:, None, :] - starts[None, :, :]
    t = np.clip(np.einsum("psd,sd->ps", rel, d) / (seg_len**2), 0.0, 1.0)
    closest = starts[None, :, :] + t[..., None] * d[None, :, :]
    dist = np.linalg.norm(p[:, None, :] - closest, axis=-1)
    best = np.argmin(dist, axis=1)
    rows = np.arange(len(p))
    arclength = path.cumulative[best] + t[rows, best] * seg_len[best]
    tangent = d[best] / seg_len[best, None]
    return Projection(distance=dist[rows, best], arclength=arclength, tangent=tangent)


def path_min_distance(trajectory: npt.ArrayLike, path: Polyline) -> float:
    """Minimum distance from any trajectory point to any path segment."""
    pts = np.asarray(trajectory, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValidationError("trajectory is empty")
    return float(point_segment_distances(pts, path.points[:-1], path.points[1:]).min())


def progress_along(path: Polyline, point: npt.ArrayLike) -> float:
    """Arc-length coordinate of the closest projection of ``point`` onto ``path``."""
    return float(project(path, point).arclength[0])


def polyline_length(points: npt.ArrayLike) -> float:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def resample_chord(points: npt.ArrayLike, spacing: float, count: int) -> Points:
    """``count`` points along a path, each exactly ``spacing`` (straight-line) from the last.

    The first point is ``points[0]``. Each next point is the first place the
    path leaves the circle of radius ``spacing`` around the previous one; past
    the end of the path the final direction is continued.
    """
    if spacing <= 0:
        raise ValidationError("spacing must be positive", details={"spacing": spacing})
    pts = Polyline.from_points(extend_straight(points, spacing * count)).points
    out = np.empty((count, 2))
    out[0] = current = pts[0]
    segment = 0
    start = current
    for k in range(1, count):
        found = False
        while segment < len(pts) - 1:
            end = pts[segment + 1]
            if np.linalg.norm(end - current) >= spacing:
                d = end - start
                f = start - current
                dd = float(d @ d)
                fd = float(f @ d)
                disc = max(fd * fd - dd * (float(f @ f) - spacing * spacing), 0.0)
                t = (-fd + math.sqrt(disc)) / dd
                current = start + t * d
                start = current
                found = True
                break
            segment += 1
            start = pts[segment]
        if not found:
            moving = np.diff(pts, axis=0)
            direction = moving[-1] / np.linalg.norm(moving[-1])
            current = current + spacing * direction
            start = current
        out[k] = current
    return out
