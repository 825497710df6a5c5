"""Pose-sequence helpers: headings from motion, time interpolation, swept contact."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from app.geometry.ops import boxes_overlap
from app.geometry.primitives import Footprint, wrap_angles
from app.scene.types import Poses

MIN_MOTION = 1e-6
CONTACT_GRID = 0.1
INTERACTION_MARGIN = 0.25


def conflict_threshold(a: Footprint, b: Footprint, margin: float = INTERACTION_MARGIN) -> float:
    """Point-to-path distance under which two vehicles are considered in conflict."""
    return a.half_width + b.half_width + margin


def headings_from_points(points: npt.ArrayLike, initial_heading: float) -> npt.NDArray[np.float64]:
    """Heading of each displacement ``points[k-1] -> points[k]``.

    ``points[0]`` is the reference position; the result has ``len(points) - 1``
    entries. Displacements shorter than 1e-6 m keep the previous heading.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    deltas = np.diff(pts, axis=0)
    headings = np.empty(len(deltas))
    previous = initial_heading
    for k, (dx, dy) in enumerate(deltas):
        if dx * dx + dy * dy > MIN_MOTION * MIN_MOTION:
            previous = float(np.arctan2(dy, dx))
        headings[k] = previous
    return headings


def poses_from_points(points: npt.ArrayLike, initial_heading: float) -> Poses:
    """Attach motion headings to ``points[1:]`` (``points[0]`` is the current position)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([pts[1:], headings_from_points(pts, initial_heading)])


def interpolate_poses(poses: Poses, step: float, grid: float) -> Poses:
    """Linearly resample a pose sequence sampled every ``step`` seconds onto ``grid`` spacing.

    Headings interpolate along the shorter arc.
    """
    poses = np.asarray(poses, dtype=np.float64)
    if len(poses) == 1:
        return poses.copy()
    duration = step * (len(poses) - 1)
    count = int(round(duration / grid))
    times = np.arange(count + 1) * grid
    knots = np.arange(len(poses)) * step
    x = np.interp(times, knots, poses[:, 0])
    y = np.interp(times, knots, poses[:, 1])
    unwrapped = np.unwrap(poses[:, 2])
    h = wrap_angles(np.interp(times, knots, unwrapped))
    return np.column_stack([x, y, h])


@dataclass(frozen=True)
class Contact:
    time: float
    other: int
    ego_pose: npt.NDArray[np.float64]
    other_pose: npt.NDArray[np.float64]


def first_contact(
    ego: Poses,
    ego_footprint: Footprint,
    others: list[Poses],
    other_footprints: list[Footprint],
    step: float,
    grid: float = CONTACT_GRID,
) -> Contact | None:
    """Earliest footprint overlap between the ego and any other pose sequence.

    All sequences start at the same instant and share ``step``; each is
    resampled onto ``grid``. Ties in time resolve to the lowest other index.
    """
    ego_dense = interpolate_poses(ego, step, grid)
    best: Contact | None = None
    for index, (poses, fp) in enumerate(zip(others, other_footprints, strict=True)):
        dense = interpolate_poses(poses, step, grid)
        n = min(len(dense), len(ego_dense))
        hits = boxes_overlap(
            ego_dense[:n, :2], ego_dense[:n, 2], ego_footprint, dense[:n, :2], dense[:n, 2], fp
        )
        if not hits.any():
            continue
        k = int(np.argmax(hits))
        if best is None or k * grid < best.time - 1e-12:
            best = Contact(time=k * grid, other=index, ego_pose=ego_dense[k], other_pose=dense[k])
    return best
