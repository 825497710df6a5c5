"""Unit tests for the reward subscores."""

import math

import numpy as np
import pytest

from app.geometry.ops import boxes_overlap
from app.geometry.primitives import wrap_angle
from app.reward.subscores import (
    COMFORT_THRESHOLDS,
    REAR_CONE,
    comfort_term,
    dd_from_distance,
    ego_poses,
    score_comfort,
    score_dac,
    score_dd,
    score_ep,
    score_nc,
    score_ttc,
)
from app.scene.kinematics import CONTACT_GRID, interpolate_poses
from app.scene.types import DT
from tests.helpers import ROAD, Mover, straight_scene

T = 8
STEPS = np.arange(1, T + 1)
DENSE_GRID = 0.001


def _cruise(speed: float = 8.0, y: float = 0.0) -> np.ndarray:
    return np.column_stack([speed * 0.5 * STEPS, np.full(T, y)])


def test_empty_scene_has_no_collision():
    result = score_nc(_cruise(), straight_scene())
    assert result.score == 1.0
    assert not result.collided


def test_head_on_overlap_is_at_fault():
    scene = straight_scene([Mover(30.0, 0.0, math.pi, 8.0)])
    result = score_nc(_cruise(), scene)
    assert result.score == 0.0
    assert result.collided and result.at_fault
    # closing at 16 m/s over a 25.5 m gap
    assert result.time == pytest.approx(1.6, abs=0.1)
    assert result.agent_id == "a0"


def test_stationary_ego_struck_from_behind_is_not_at_fault():
    scene = straight_scene([Mover(-15.0, 0.0, 0.0, 8.0)], ego_speed=0.0)
    result = score_nc(np.zeros((T, 2)), scene)
    assert result.collided
    assert not result.at_fault
    assert result.score == 1.0


def test_earliest_of_several_non_fault_contacts_is_reported():
    # a1 starts closer behind the stopped ego and reaches it first
    scene = straight_scene([Mover(-30.0, 0.0, 0.0, 8.0), Mover(-8.0, 0.0, 0.0, 8.0)], ego_speed=0.0)
    result = score_nc(np.zeros((T, 2)), scene)
    assert result.collided and not result.at_fault
    assert result.score == 1.0
    assert result.agent_id == "a1"
    assert result.time == pytest.approx(0.5, abs=0.1)


def test_at_fault_contact_outranks_an_earlier_rear_strike():
    scene = straight_scene([Mover(-8.0, 0.0, 0.0, 8.0), Mover(30.0, 0.0, math.pi, 8.0)], ego_speed=0.0)
    result = score_nc(np.zeros((T, 2)), scene)
    assert result.at_fault
    assert result.score == 0.0
    assert result.agent_id == "a1"
    assert result.time == pytest.approx(3.2, abs=0.1)


def _rear_strike(ego_pose, other_pose):
    bearing = math.atan2(other_pose[1] - ego_pose[1], other_pose[0] - ego_pose[0])
    return abs(wrap_angle(bearing - ego_pose[2] - math.pi)) <= REAR_CONE


def _aimed_mover(rng):
    side = rng.choice([-1.0, 1.0])
    start = np.array([side * rng.uniform(8, 40), rng.uniform(-4, 4)])
    target = np.array([rng.uniform(-5, 30), rng.uniform(-1, 1)])
    heading = math.atan2(target[1] - start[1], target[0] - start[0])
    return Mover(float(start[0]), float(start[1]), heading, rng.uniform(2, 14))


def test_contact_grid_agrees_with_dense_time_oracle():
    rng = np.random.default_rng(0)
    collisions = 0
    for _ in range(200):
        stationary = rng.uniform() < 0.3
        scene = straight_scene([_aimed_mover(rng)], ego_speed=0.0 if stationary else 8.0)
        rollout = np.zeros((T, 2)) if stationary else _cruise(rng.uniform(1, 12))
        coarse = score_nc(rollout, scene)
        dense = score_nc(rollout, scene, grid=DENSE_GRID)

        agent = scene.agents[0]
        ego = interpolate_poses(ego_poses(rollout, scene), DT, DENSE_GRID)
        other = interpolate_poses(np.vstack([agent.history[-1], agent.future[:T]]), DT, DENSE_GRID)
        hits = boxes_overlap(
            ego[:, :2], ego[:, 2], scene.ego.footprint, other[:, :2], other[:, 2], agent.footprint
        )
        assert dense.collided == bool(hits.any())
        if hits.any():
            k = int(np.argmax(hits))
            tail = hits[k:]
            duration = (len(tail) if tail.all() else int(np.argmin(tail))) * DENSE_GRID
            if duration < CONTACT_GRID + 2 * DENSE_GRID:
                continue  # contact shorter than one grid step

        assert coarse.collided == dense.collided
        if not dense.collided:
            continue
        collisions += 1
        assert dense.time - 1e-9 <= coarse.time <= dense.time + CONTACT_GRID + 1e-9
        if not stationary:
            assert coarse.at_fault and dense.at_fault
            continue
        kc = int(round(coarse.time / DENSE_GRID))
        if _rear_strike(ego[k], other[k]) == _rear_strike(ego[kc], other[kc]):
            assert coarse.at_fault == dense.at_fault
    assert collisions >= 10


def test_dac_fractions():
    rollout = _cruise()
    assert score_dac(rollout, ROAD) == 1.0
    rollout[-2:, 1] = 10.0
    assert score_dac(rollout, ROAD) == 0.75
    rollout[:, 1] = 10.0
    assert score_dac(rollout, ROAD) == 0.0


def test_forward_motion_has_no_opposite_progress():
    score, d_opp = score_dd(_cruise(), straight_scene())
    assert score == 1.0
    assert d_opp == 0.0


def test_reversing_along_the_lane_accumulates_opposite_progress():
    rollout = np.column_stack([-0.5 * STEPS, np.zeros(T)])
    score, d_opp = score_dd(rollout, straight_scene())
    assert d_opp == pytest.approx(4.0)
    assert score == pytest.approx(0.5)


def test_driving_in_the_oncoming_lane_is_opposite():
    rollout = np.column_stack([0.75 * STEPS, np.full(T, 4.0)])
    score, d_opp = score_dd(rollout, straight_scene())
    assert d_opp == pytest.approx(np.hypot(0.75, 4.0) + 7 * 0.75)
    assert score == 0.0


def test_dd_piecewise_values_and_continuity():
    assert dd_from_distance(4.0) == 0.5
    assert dd_from_distance(6.0) == 0.0
    for knot in (2.0, 6.0):
        assert abs(dd_from_distance(knot - 1e-12) - dd_from_distance(knot + 1e-12)) < 1e-9
    values = [dd_from_distance(d) for d in np.linspace(0, 10, 101)]
    assert all(a >= b for a, b in zip(values, values[1:], strict=False))


def test_ttc_without_infraction_is_one():
    assert score_ttc(_cruise(), straight_scene([Mover(20.0, 0.0, 0.0, 8.0)])) == (1.0, None)


def test_ttc_scores_first_infraction_step():
    scene = straight_scene([Mover(30.0, 0.0, 0.0, 0.0)])
    score, step = score_ttc(_cruise(), scene)
    assert step == 5
    assert score == 5 / 8


def test_ttc_infraction_at_first_step():
    scene = straight_scene([Mover(9.0, 0.0, 0.0, 0.0)])
    score, step = score_ttc(_cruise(), scene)
    assert (score, step) == (0.125, 1)


def test_constant_velocity_rollout_is_comfortable():
    score, terms = score_comfort(_cruise(), straight_scene())
    assert score == 1.0
    assert all(t.delta == 0.0 for t in terms.values())


def test_comfort_term_at_one_scale_is_inverse_e():
    threshold = COMFORT_THRESHOLDS["jerk"]
    term = comfort_term(threshold + 0.5 * threshold, threshold)
    assert term.score == pytest.approx(math.exp(-1.0))


def test_comfort_takes_the_smallest_metric_score():
    # one 8 m/s step then a dead stop: decel and jerk violated
    rollout = np.column_stack([np.full(T, 4.0), np.zeros(T)])
    score, terms = score_comfort(rollout, straight_scene())
    violated = [t.score for t in terms.values() if t.delta > 0]
    assert len(violated) >= 2
    assert score == min(violated)


def test_comfort_is_monotone_in_violation():
    threshold = COMFORT_THRESHOLDS["lat_accel"]
    scores = [comfort_term(threshold + d, threshold).score for d in np.linspace(0, 10, 21)]
    assert scores[0] == 1.0
    assert all(a >= b for a, b in zip(scores, scores[1:], strict=False))


def test_ep_of_gt_is_one():
    scene = straight_scene()
    assert score_ep(scene.ego.gt_future, scene) == 1.0


def test_ep_of_stationary_rollout_is_zero():
    assert score_ep(np.zeros((T, 2)), straight_scene()) == 0.0


def test_ep_half_progress():
    assert score_ep(_cruise(4.0), straight_scene()) == pytest.approx(0.5)
