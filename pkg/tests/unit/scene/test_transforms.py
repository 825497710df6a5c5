"""Unit tests for rigid scene transforms."""

import math

import numpy as np

from app.scene.generator import generate_scene
from app.scene.transforms import RigidTransform, ego_frame, ego_frame_transform, transform_scene
from app.schemas.v1.common import ScenarioTag
from tests.helpers import three_agent_scene


def _close(a, b, tol=1e-9):
    return np.allclose(a, b, atol=tol, rtol=0.0)


def _positions(scene):
    return np.array([e.position for e in scene.entities])


def test_ego_frame_of_origin_scene_is_identity(fixture_scene):
    moved = ego_frame_transform(fixture_scene)
    for a, b in zip(moved.entities, fixture_scene.entities, strict=True):
        assert _close(a.history, b.history)
        assert _close(a.future, b.future)
    assert _close(moved.route.points, fixture_scene.route.points)


def test_ego_ends_at_origin_with_zero_heading():
    scene = generate_scene(5, ScenarioTag.CROSSING)
    local = ego_frame_transform(scene)
    assert _close(local.ego.position, [0.0, 0.0])
    assert abs(local.ego.heading) < 1e-9
    assert _close(local.route.start, [0.0, 0.0], tol=1.0)


def test_transform_then_inverse_restores_scene():
    scene = generate_scene(9, ScenarioTag.OVERTAKE)
    transform = ego_frame(scene)
    back = transform_scene(transform_scene(scene, transform), transform.inverse())
    for a, b in zip(back.entities, scene.entities, strict=True):
        assert _close(a.history[:, :2], b.history[:, :2])
        assert _close(np.cos(a.future[:, 2] - b.future[:, 2]), 1.0)
    assert _close(back.drivable.vertices, scene.drivable.vertices)


def test_pairwise_distances_preserved():
    scene = generate_scene(4, ScenarioTag.MERGE)
    before = _positions(scene)
    after = _positions(ego_frame_transform(scene))
    d_before = np.linalg.norm(before[:, None] - before[None], axis=-1)
    d_after = np.linalg.norm(after[:, None] - after[None], axis=-1)
    assert _close(d_before, d_after)


def test_compose_matches_sequential_application():
    first = RigidTransform(rotation=0.7, translation=(3.0, -1.0))
    second = RigidTransform(rotation=-2.1, translation=(-4.0, 2.5))
    points = np.random.default_rng(0).normal(size=(20, 2))
    assert _close(second.compose(first).apply_points(points), second.apply_points(first.apply_points(points)))


def test_apply_poses_rotates_heading():
    transform = RigidTransform(rotation=math.pi / 2)
    pose = transform.apply_poses(np.array([[1.0, 0.0, 0.0]]))
    assert _close(pose, [[0.0, 1.0, math.pi / 2]])


def test_masks_and_metadata_survive_transform():
    scene = three_agent_scene()
    moved = transform_scene(scene, RigidTransform(rotation=1.0, translation=(10.0, 5.0)))
    assert moved.scene_id == scene.scene_id
    assert [a.id for a in moved.agents] == [a.id for a in scene.agents]
    for a, b in zip(moved.agents, scene.agents, strict=True):
        assert np.array_equal(a.future_valid, b.future_valid)
