"""Seeded procedural generator of interaction-critical driving scenes.

Each template lays out a road in a local frame (ego driving along +x near the
origin), scripts every entity on a fine time grid, validates the expert
(collision-free, on-road, goal reachable) and finally applies a random rigid
world transform. Invalid draws are retried with the next attempt counter, so
the output is a pure function of ``(seed, tag)``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import structlog

from app.core.errors import ConfigurationError, ValidationError
from app.geometry.ops import path_min_distance, points_in_polygon
from app.geometry.primitives import DrivablePolygon, Footprint, Polyline
from app.scene.kinematics import conflict_threshold, first_contact
from app.scene.transforms import RigidTransform, transform_scene
from app.scene.types import (
    DT,
    EGO_ID,
    HISTORY_STEPS,
    MAX_AGENTS,
    SCRIPT_STEPS,
    AgentState,
    Scene,
)
from app.schemas.v1.common import ScenarioTag

logger = structlog.get_logger(__name__)

FINE_DT = 0.05
SUBSTEPS = int(round(DT / FINE_DT))
T_START = -(HISTORY_STEPS - 1) * DT
N_FINE = int(round((SCRIPT_STEPS * DT - T_START) / FINE_DT)) + 1
K_NOW = int(round(-T_START / FINE_DT))
TIMES = T_START + FINE_DT * np.arange(N_FINE)

ROAD_HALF_EXTENT = 400.0
VISIBILITY_RANGE = 60.0
MAX_ATTEMPTS = 200

TAG_INDEX = {tag: i for i, tag in enumerate(ScenarioTag)}


# -- scripted motion ----------------------------------------------------------


@dataclass
class _Script:
    positions: np.ndarray  # (N_FINE, 2)
    heading0: float
    footprint: Footprint

    def poses(self, indices: np.ndarray) -> np.ndarray:
        headings = _fine_headings(self.positions, self.heading0)
        return np.column_stack([self.positions[indices], headings[indices]])


def _fine_headings(positions: np.ndarray, heading0: float) -> np.ndarray:
    deltas = np.diff(positions, axis=0)
    headings = np.empty(len(positions))
    previous = heading0
    for k in range(len(positions)):
        if k < len(deltas):
            dx, dy = deltas[k]
            if dx * dx + dy * dy > 1e-10:
                previous = math.atan2(dy, dx)
        headings[k] = previous
    return headings


def _integrate(
    x0: float,
    v0: float,
    accel: Callable[[int, float, float], float],
    v_max: float = 20.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Semi-implicit Euler of a longitudinal coordinate over the fine grid."""
    xs = np.empty(N_FINE)
    vs = np.empty(N_FINE)
    x, v = x0, v0
    for k in range(N_FINE):
        xs[k], vs[k] = x, v
        a = accel(k, x, v)
        v = min(max(v + a * FINE_DT, 0.0), v_max)
        x += v * FINE_DT
    return xs, vs


@dataclass(frozen=True)
class IdmParams:
    desired_speed: float
    time_headway: float = 1.2
    min_gap: float = 2.0
    max_accel: float = 1.5
    comfort_decel: float = 2.0
    delta: int = 4
    max_decel: float = 7.0

    def acceleration(self, speed: float, gap: float | None, closing_speed: float) -> float:
        free = 1.0 - (speed / self.desired_speed) ** self.delta
        if gap is None:
            return float(np.clip(self.max_accel * free, -self.max_decel, self.max_accel))
        s_star = (
            self.min_gap
            + speed * self.time_headway
            + speed * closing_speed / (2.0 * math.sqrt(self.max_accel * self.comfort_decel))
        )
        acc = self.max_accel * (free - (max(s_star, 0.0) / max(gap, 0.1)) ** 2)
        return float(np.clip(acc, -self.max_decel, self.max_accel))


def _idm_follow(
    x0: float,
    v0: float,
    params: IdmParams,
    length: float,
    leader_x: np.ndarray,
    leader_v: np.ndarray,
    leader_length: float,
    active: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    def accel(k: int, x: float, v: float) -> float:
        if active is not None and not active[k]:
            return params.acceleration(v, None, 0.0)
        gap = leader_x[k] - x - 0.5 * (length + leader_length)
        return params.acceleration(v, gap, v - leader_v[k])

    return _integrate(x0, v0, accel)


def _stop_and_go(
    x0: float,
    v0: float,
    cruise: float,
    stop_x: float,
    release_time: float,
    start_brake: float = 1.5,
    launch: float = 2.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Drive toward a stop line, hold until ``release_time``, then launch to cruise."""

    def accel(k: int, x: float, v: float) -> float:
        if TIMES[k] >= release_time:
            return min(launch, (cruise - v) / FINE_DT) if v < cruise else 0.0
        remaining = stop_x - x
        if remaining <= 0.05:
            return -v / FINE_DT
        needed = v * v / (2.0 * remaining)
        if needed >= start_brake:
            return -needed
        return min(launch, (cruise - v) / FINE_DT) if v < cruise else 0.0

    return _integrate(x0, v0, accel)


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(math.pi * u))


def _straight(x: np.ndarray, y: float) -> np.ndarray:
    return np.column_stack([x, np.full_like(x, y)])


def _footprint(rng: np.random.Generator) -> Footprint:
    return Footprint(float(rng.uniform(4.2, 4.8)), float(rng.uniform(1.8, 2.0)))


def _time_to_reach(xs: np.ndarray, target: float) -> float:
    hit = np.nonzero(xs >= target)[0]
    return float(TIMES[hit[0]]) if len(hit) else math.inf


# -- templates -----------------------------------------------------------------


@dataclass(frozen=True)
class _FillerLane:
    """Background traffic lane: agents share one speed so they never close on each other."""

    y: float
    direction: float
    speed: float
    start: tuple[float, float]
    spacing_sign: float = 1.0


def _oncoming(rng: np.random.Generator, w: float) -> _FillerLane:
    return _FillerLane(w, -1.0, float(rng.uniform(3.0, 12.0)), (-20.0, 10.0))


@dataclass
class _Layout:
    ego: _Script
    agents: list[_Script]
    drivable: np.ndarray
    lanes: list[np.ndarray]
    filler_lanes: list[_FillerLane] = field(default_factory=list)
    interacting: list[int] = field(default_factory=list)


def _road(w: float, y_low: float, y_high: float) -> np.ndarray:
    r = ROAD_HALF_EXTENT
    return np.array([[-r, y_low], [r, y_low], [r, y_high], [-r, y_high]])


def _lane(y: float, direction: float) -> np.ndarray:
    r = ROAD_HALF_EXTENT
    return np.array([[-r * direction, y], [r * direction, y]])


def _ego_cruise(rng: np.random.Generator, low: float, high: float) -> tuple[_Script, float]:
    v = float(rng.uniform(low, high))
    x = v * TIMES
    return _Script(_straight(x, 0.0), 0.0, _footprint(rng)), v


def _free_flow(rng: np.random.Generator, w: float) -> _Layout:
    ego, _ = _ego_cruise(rng, 3.0, 12.0)
    return _Layout(
        ego=ego,
        agents=[],
        drivable=_road(w, -w / 2, 1.5 * w),
        lanes=[_lane(0.0, 1.0), _lane(w, -1.0)],
        filler_lanes=[_oncoming(rng, w)],
    )


def _lead_brake(rng: np.random.Generator, w: float) -> _Layout:
    v = float(rng.uniform(5.0, 12.0))
    ego_fp, lead_fp = _footprint(rng), _footprint(rng)
    x_lead0 = v * float(rng.uniform(1.3, 2.0)) + 8.0
    t_brake = float(rng.uniform(0.0, 1.0))
    decel = float(rng.uniform(2.5, 4.0))
    v_low = float(rng.uniform(0.0, 2.0))
    hold = float(rng.uniform(1.0, 2.0))
    state = {"stopped_at": None}

    def lead_accel(k: int, x: float, speed: float) -> float:
        t = TIMES[k]
        if t < t_brake:
            return 0.0
        if state["stopped_at"] is None:
            if speed > v_low + 1e-9:
                return max(-decel, (v_low - speed) / FINE_DT)
            state["stopped_at"] = t
        if t - state["stopped_at"] < hold:
            return 0.0
        return min(1.5, (v - speed) / FINE_DT) if speed < v else 0.0

    lead_x, lead_v = _integrate(x_lead0 + v * T_START, v, lead_accel)
    params = IdmParams(desired_speed=v)
    ego_x, _ = _idm_follow(
        v * T_START, v, params, ego_fp.length, lead_x, lead_v, lead_fp.length
    )
    return _Layout(
        ego=_Script(_straight(ego_x, 0.0), 0.0, ego_fp),
        agents=[_Script(_straight(lead_x, 0.0), 0.0, lead_fp)],
        drivable=_road(w, -w / 2, 1.5 * w),
        lanes=[_lane(0.0, 1.0), _lane(w, -1.0)],
        filler_lanes=[_oncoming(rng, w)],
        interacting=[0],
    )


def _merge(rng: np.random.Generator, w: float) -> _Layout:
    v = float(rng.uniform(4.0, 7.0))
    ego_fp, agent_fp = _footprint(rng), _footprint(rng)
    go_first = bool(rng.integers(0, 2))
    params = IdmParams(desired_speed=v)

    if go_first:
        v_agent = v + float(rng.uniform(0.5, 1.5))
        x0 = float(rng.uniform(6.5, 8.5))
        t_lc = float(rng.uniform(0.0, 0.3))
        duration = 1.5
        agent_x = x0 + v_agent * TIMES
        agent_v = np.full(N_FINE, v_agent)
        lateral = _smoothstep((TIMES - t_lc) / duration)
        # the ego reacts once the merger is a third of the way across
        ego_x, _ = _idm_follow(
            v * T_START,
            v,
            params,
            ego_fp.length,
            agent_x,
            agent_v,
            agent_fp.length,
            active=lateral >= 0.3,
        )
    else:
        v_agent = v * float(rng.uniform(0.8, 0.95))
        x0 = float(rng.uniform(-12.0, -8.0))
        agent_x = x0 + v_agent * TIMES
        ego_x = v * TIMES
        clear = (ego_x - agent_x) >= 0.5 * (ego_fp.length + agent_fp.length) + 4.0
        t_lc = max(0.0, float(TIMES[np.argmax(clear & (TIMES >= 0.0))]))
        duration = 2.0
        lateral = _smoothstep((TIMES - t_lc) / duration)

    agent_pos = np.column_stack([agent_x, -w + w * lateral])
    done = np.nonzero(lateral >= 1.0)[0]
    x_done = float(agent_x[done[0]]) if len(done) else float(agent_x[-1])
    x_end = x_done + 5.0
    r = ROAD_HALF_EXTENT
    drivable = np.array(
        [
            [-r, -1.5 * w],
            [x_end, -1.5 * w],
            [x_end + 20.0, -0.5 * w],
            [r, -0.5 * w],
            [r, 1.5 * w],
            [-r, 1.5 * w],
        ]
    )
    aux = np.array([[-r, -w], [x_end, -w]])
    return _Layout(
        ego=_Script(_straight(ego_x, 0.0), 0.0, ego_fp),
        agents=[_Script(agent_pos, 0.0, agent_fp)],
        drivable=drivable,
        lanes=[_lane(0.0, 1.0), aux, _lane(w, -1.0)],
        filler_lanes=[_oncoming(rng, w)],
        interacting=[0],
    )


def _crossing(rng: np.random.Generator, w: float) -> _Layout:
    v = float(rng.uniform(3.0, 6.0))
    v_agent = float(rng.uniform(3.0, 8.0))
    ego_fp, agent_fp = _footprint(rng), _footprint(rng)
    x_c = float(rng.uniform(12.0, 20.0))
    lane_x = x_c + 0.5 * w
    ego_stop = x_c - w - 0.5 * ego_fp.length - 1.0
    agent_stop = -0.5 * w - 0.5 * agent_fp.length - 1.0
    t_ego_arrival = ego_stop / v
    lag = float(rng.uniform(-1.0, 1.0))
    y0 = agent_stop - v_agent * max(t_ego_arrival + lag, 0.5)
    agent_yields = bool(rng.integers(0, 2))

    if agent_yields:
        ego_x = v * TIMES
        t_clear = _time_to_reach(ego_x - 0.5 * ego_fp.length, x_c + w + 1.0)
        agent_y, _ = _stop_and_go(y0 + v_agent * T_START, v_agent, v_agent, agent_stop, t_clear)
    else:
        agent_y = y0 + v_agent * TIMES
        t_clear = _time_to_reach(agent_y - 0.5 * agent_fp.length, 1.5 * w + 1.0)
        ego_x, _ = _stop_and_go(v * T_START, v, v, ego_stop, t_clear)

    crosser = _Script(np.column_stack([np.full(N_FINE, lane_x), agent_y]), math.pi / 2, agent_fp)
    r = ROAD_HALF_EXTENT
    lo, hi = x_c - w, x_c + w
    drivable = np.array(
        [
            [-r, -0.5 * w],
            [lo, -0.5 * w],
            [lo, -r],
            [hi, -r],
            [hi, -0.5 * w],
            [r, -0.5 * w],
            [r, 1.5 * w],
            [hi, 1.5 * w],
            [hi, r],
            [lo, r],
            [lo, 1.5 * w],
            [-r, 1.5 * w],
        ]
    )
    return _Layout(
        ego=_Script(_straight(ego_x, 0.0), 0.0, ego_fp),
        agents=[crosser],
        drivable=drivable,
        lanes=[
            _lane(0.0, 1.0),
            _lane(w, -1.0),
            np.array([[lane_x, -r], [lane_x, r]]),
            np.array([[x_c - 0.5 * w, r], [x_c - 0.5 * w, -r]]),
        ],
        filler_lanes=[_oncoming(rng, w)],
        interacting=[0],
    )


def _overtake(rng: np.random.Generator, w: float) -> _Layout:
    v = float(rng.uniform(7.0, 11.0))
    v_slow = float(rng.uniform(1.5, 3.5))
    ego_fp, lead_fp = _footprint(rng), _footprint(rng)
    mean_length = 0.5 * (ego_fp.length + lead_fp.length)
    out_gap = (v - v_slow) * float(rng.uniform(1.4, 1.8)) + mean_length
    x_l0 = out_gap + float(rng.uniform(4.0, 10.0))
    lead_x = x_l0 + v_slow * TIMES
    ego_x = v * TIMES
    gap = ego_x - lead_x  # negative while behind
    back_gap = mean_length + 6.0
    t_out = max(0.0, float(TIMES[np.argmax(gap >= -out_gap)]))
    t_back = float(TIMES[np.argmax(gap >= back_gap)])
    duration = 2.0
    lateral = _smoothstep((TIMES - t_out) / duration) - _smoothstep((TIMES - t_back) / duration)
    ego_pos = np.column_stack([ego_x, w * lateral])
    return _Layout(
        ego=_Script(ego_pos, 0.0, ego_fp),
        agents=[_Script(_straight(lead_x, 0.0), 0.0, lead_fp)],
        drivable=_road(w, -w / 2, 1.5 * w),
        lanes=[_lane(0.0, 1.0), _lane(w, 1.0)],
        filler_lanes=[
            _FillerLane(w, 1.0, v + float(rng.uniform(2.0, 4.0)), (60.0, 80.0)),
            _FillerLane(0.0, 1.0, v_slow, (-60.0, -35.0), spacing_sign=-1.0),
        ],
        interacting=[0],
    )


TEMPLATES: dict[ScenarioTag, Callable[[np.random.Generator, float], _Layout]] = {
    ScenarioTag.FREE_FLOW: _free_flow,
    ScenarioTag.LEAD_BRAKE: _lead_brake,
    ScenarioTag.MERGE: _merge,
    ScenarioTag.CROSSING: _crossing,
    ScenarioTag.OVERTAKE: _overtake,
}


# -- assembly and validation ----------------------------------------------------


_HISTORY_IDX = K_NOW + SUBSTEPS * np.arange(-(HISTORY_STEPS - 1), 1)
_FUTURE_IDX = K_NOW + SUBSTEPS * np.arange(1, SCRIPT_STEPS + 1)
_ALL_IDX = np.concatenate([[K_NOW], _FUTURE_IDX])


def _script_collides(a: _Script, b: _Script) -> bool:
    return (
        first_contact(a.poses(_ALL_IDX), a.footprint, [b.poses(_ALL_IDX)], [b.footprint], DT)
        is not None
    )


def _split_slots(rng: np.random.Generator, slots: int, lanes: int) -> list[int]:
    if lanes == 1:
        return [slots]
    cuts = np.sort(rng.integers(0, slots + 1, size=lanes - 1))
    return list(np.diff(np.concatenate([[0], cuts, [slots]])).astype(int))


def _add_fillers(
    rng: np.random.Generator, layout: _Layout, target: int, drivable: DrivablePolygon
) -> None:
    """Place background traffic lane by lane until ``target`` agents exist or a lane fills up."""
    slots = max(0, target - len(layout.agents))
    if slots == 0 or not layout.filler_lanes:
        return
    for lane, count in zip(
        layout.filler_lanes, _split_slots(rng, slots, len(layout.filler_lanes)), strict=True
    ):
        cursor = float(rng.uniform(*lane.start))
        heading = 0.0 if lane.direction > 0 else math.pi
        for _ in range(count):
            placed = False
            for _ in range(10):
                xs = cursor + lane.direction * lane.speed * TIMES
                candidate = _Script(_straight(xs, lane.y), heading, _footprint(rng))
                cursor += lane.spacing_sign * float(rng.uniform(12.0, 25.0))
                if not points_in_polygon(candidate.positions[_HISTORY_IDX], drivable).all():
                    continue
                if _script_collides(layout.ego, candidate):
                    continue
                if any(_script_collides(other, candidate) for other in layout.agents):
                    continue
                layout.agents.append(candidate)
                placed = True
                break
            if not placed:
                break


def _to_state(script: _Script, agent_id: str, ego_positions: np.ndarray | None) -> AgentState:
    history = script.poses(_HISTORY_IDX)
    future = script.poses(_FUTURE_IDX)
    if ego_positions is None:
        valid = np.ones(SCRIPT_STEPS, dtype=bool)
    else:
        valid = np.linalg.norm(future[:, :2] - ego_positions, axis=1) <= VISIBILITY_RANGE
    return AgentState(
        id=agent_id, footprint=script.footprint, history=history, future=future, future_valid=valid
    )


def _route_from(ego: AgentState, length: float) -> Polyline:
    pts = np.vstack([ego.position[None, :], ego.future[:, :2]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    stop = int(np.searchsorted(cum, length))
    kept = pts[:stop]
    over = length - cum[stop - 1]
    tail = pts[stop - 1] + (pts[stop] - pts[stop - 1]) * (over / seg[stop - 1])
    return Polyline.from_points(np.vstack([kept, tail]))


def _validate(scene: Scene, layout: _Layout) -> str | None:
    """Return a rejection reason, or None when the expert is feasible."""
    ego = scene.ego
    ego_path = np.vstack([ego.history[-1:], ego.future])
    contact = first_contact(
        ego_path,
        ego.footprint,
        [np.vstack([a.history[-1:], a.future]) for a in scene.agents],
        [a.footprint for a in scene.agents],
        DT,
    )
    if contact is not None:
        return "expert_collision"
    if not points_in_polygon(ego.future[:, :2], scene.drivable).all():
        return "expert_off_road"
    for agent in scene.agents:
        if not points_in_polygon(agent.history[:, :2], scene.drivable).all():
            return "agent_history_off_road"
    gt_sp = scene.ego_gt_spatial()
    gt_path = Polyline.from_points(gt_sp)

    def conflicts(agent: AgentState) -> bool:
        if not agent.supervised:
            return False
        threshold = conflict_threshold(ego.footprint, agent.footprint)
        return path_min_distance(agent.gt_future[agent.gt_valid], gt_path) < threshold

    if scene.scenario_tag == ScenarioTag.FREE_FLOW:
        if any(
            path_min_distance(a.gt_future, scene.route)
            < conflict_threshold(ego.footprint, a.footprint)
            for a in scene.agents
        ):
            return "free_flow_conflict"
    elif scene.scenario_tag == ScenarioTag.MERGE:
        if not any(conflicts(scene.agents[i]) for i in layout.interacting):
            return "merge_without_interaction"
    return None


def _attempt(seed: int, tag: ScenarioTag, attempt: int) -> Scene | str:
    rng = np.random.default_rng([seed, TAG_INDEX[tag], attempt])
    w = float(rng.uniform(3.0, 4.0))
    layout = TEMPLATES[tag](rng, w)
    drivable = DrivablePolygon.counterclockwise(layout.drivable)
    target = int(rng.integers(2, 11))
    _add_fillers(rng, layout, min(target, MAX_AGENTS), drivable)
    if len(layout.agents) < 2:
        return "too_few_agents"

    ego = _to_state(layout.ego, EGO_ID, None)
    ego_future_xy = ego.future[:, :2]
    agents = tuple(
        _to_state(script, f"a{i}", ego_future_xy) for i, script in enumerate(layout.agents)
    )
    travelled = float(
        np.linalg.norm(np.diff(np.vstack([ego.position, ego_future_xy]), axis=0), axis=1).sum()
    )
    route_length = min(float(rng.uniform(40.0, 60.0)), travelled - 2.0)
    if route_length < 20.0:
        return "route_too_short"

    local = Scene(
        scene_id=f"{tag.value}-{seed}",
        seed=seed,
        scenario_tag=tag,
        ego=ego,
        agents=agents,
        route=_route_from(ego, route_length),
        drivable=drivable,
        direction_field=tuple(Polyline(lane) for lane in layout.lanes),
    )
    reason = _validate(local, layout)
    if reason is not None:
        return reason

    world = RigidTransform(
        rotation=float(rng.uniform(-math.pi, math.pi)),
        translation=(float(rng.uniform(-100.0, 100.0)), float(rng.uniform(-100.0, 100.0))),
    )
    return transform_scene(local, world)


def generate_scene(seed: int, scenario_tag: ScenarioTag | str) -> Scene:
    """Generate one scene; a pure function of ``(seed, scenario_tag)``."""
    try:
        tag = ScenarioTag(scenario_tag)
    except ValueError as exc:
        raise ConfigurationError(
            f"unknown scenario tag {scenario_tag!r}",
            details={"known": [t.value for t in ScenarioTag]},
        ) from exc

    rejections: dict[str, int] = {}
    for attempt in range(MAX_ATTEMPTS):
        result = _attempt(seed, tag, attempt)
        if isinstance(result, Scene):
            if rejections:
                logger.debug("scene_generation_retried", seed=seed, tag=tag.value, **rejections)
            return result
        rejections[result] = rejections.get(result, 0) + 1
    raise ValidationError(
        f"no feasible {tag.value} scene for seed {seed} after {MAX_ATTEMPTS} attempts",
        details=rejections,
    )


def generate_scenes(seed: int, count: int, tags: list[ScenarioTag] | None = None) -> list[Scene]:
    """Generate ``count`` scenes cycling through ``tags``; per-scene seeds derive from ``seed``."""
    tags = tags or list(ScenarioTag)
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=count)
    return [generate_scene(int(s), tags[i % len(tags)]) for i, s in enumerate(seeds)]
