"""Closed-loop episodes: execute the first planned pose, advance traffic, re-plan."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import structlog

from app.core.errors import ValidationError
from app.geometry.ops import point_in_polygon, point_segment_distances, progress_along
from app.geometry.primitives import Polyline
from app.model.network import CaadModel
from app.reward.subscores import entity_comfort
from app.scene.kinematics import first_contact
from app.scene.types import DT, FUTURE_STEPS, SCRIPT_STEPS, AgentState, Scene
from app.schemas.v1.common import EpisodeOutcome, PolicyMode, ScenarioTag
from app.schemas.v1.evaluation import EpisodeRecord
from app.simulator.background import BackgroundAgent
from app.simulator.policies import Policy, make_policy

logger = structlog.get_logger(__name__)

Array = npt.NDArray[np.float64]

GOAL_RADIUS = 2.0
COLLISION_MULTIPLIER = 0.5
OFF_ROAD_MULTIPLIER = 0.7


def driving_score(progress_ratio: float, collisions: int, off_road_events: int) -> float:
    """Route completion discounted per infraction; always in [0, 1]."""
    completion = min(max(progress_ratio, 0.0), 1.0)
    return completion * COLLISION_MULTIPLIER**collisions * OFF_ROAD_MULTIPLIER**off_road_events


@dataclass(frozen=True)
class EpisodeResult:
    scene_id: str
    scenario_tag: ScenarioTag
    policy_mode: PolicyMode
    outcome: EpisodeOutcome
    progress_ratio: float
    steps: int
    comfort: float
    collision_agent: str | None = None
    path: Array = field(default_factory=lambda: np.zeros((0, 3)), compare=False, repr=False)

    @property
    def success(self) -> bool:
        return self.outcome == EpisodeOutcome.SUCCESS

    @property
    def collided(self) -> bool:
        return self.outcome == EpisodeOutcome.COLLISION

    @property
    def off_road(self) -> bool:
        return self.outcome == EpisodeOutcome.OFF_ROAD

    @property
    def driving_score(self) -> float:
        return driving_score(self.progress_ratio, int(self.collided), int(self.off_road))

    def to_record(self) -> EpisodeRecord:
        return EpisodeRecord(
            scene_id=self.scene_id,
            scenario_tag=self.scenario_tag,
            policy_mode=self.policy_mode,
            outcome=self.outcome,
            success=self.success,
            collided=self.collided,
            off_road=self.off_road,
            progress_ratio=self.progress_ratio,
            steps=self.steps,
            comfort=self.comfort,
            driving_score=self.driving_score,
            collision_agent=self.collision_agent,
        )


def _placeholder(agent: AgentState, history: Array) -> AgentState:
    """An agent carrying only its observed history; the future is unknown in closed loop."""
    return AgentState(
        id=agent.id,
        footprint=agent.footprint,
        history=history,
        future=np.tile(history[-1], (FUTURE_STEPS, 1)),
        future_valid=np.zeros(FUTURE_STEPS, dtype=bool),
        role=agent.role,
    )


def remaining_route(route: Polyline, position: Array, heading: float) -> Polyline:
    """The part of ``route`` still ahead of ``position``, starting at ``position``."""
    travelled = progress_along(route, position)
    ahead = route.points[route.cumulative > travelled + 1e-6]
    points = Polyline.from_points(np.vstack([position[None, :], ahead])).points
    if len(points) < 2:
        points = np.vstack([position, position + [np.cos(heading), np.sin(heading)]])
    return Polyline(points)


class Episode:
    """Mutable closed-loop state of one scene."""

    def __init__(self, scene: Scene) -> None:
        self.scene = scene
        self.ego_poses: list[Array] = [row.copy() for row in scene.ego.history]
        self.agents = [BackgroundAgent.start(a) for a in scene.agents]

    @property
    def ego_pose(self) -> Array:
        return self.ego_poses[-1]

    @property
    def ego_speed(self) -> float:
        return float(np.linalg.norm(self.ego_poses[-1][:2] - self.ego_poses[-2][:2])) / DT

    def snapshot(self) -> Scene:
        scene = self.scene
        ego_history = np.array(self.ego_poses[-len(scene.ego.history) :])
        return Scene(
            scene_id=scene.scene_id,
            seed=scene.seed,
            scenario_tag=scene.scenario_tag,
            ego=_placeholder(scene.ego, ego_history),
            agents=tuple(_placeholder(b.agent, b.history) for b in self.agents),
            route=remaining_route(scene.route, self.ego_pose[:2], float(self.ego_pose[2])),
            drivable=scene.drivable,
            direction_field=scene.direction_field,
        )

    def step(self, step: int, target: Array) -> tuple[Array, list[Array]]:
        """Teleport the ego to ``target`` and advance every agent; returns the prior poses."""
        prior_ego = self.ego_pose
        prior_agents = [b.pose for b in self.agents]
        ego_speed = self.ego_speed
        for agent in self.agents:
            agent.advance(step, prior_ego, self.scene.ego.footprint, ego_speed)
        self.ego_poses.append(np.array(target, dtype=np.float64))
        return prior_ego, prior_agents

    def contact(self, prior_ego: Array, prior_agents: list[Array]) -> str | None:
        hit = first_contact(
            np.vstack([prior_ego, self.ego_pose]),
            self.scene.ego.footprint,
            [np.vstack([p, b.pose]) for p, b in zip(prior_agents, self.agents, strict=True)],
            [b.agent.footprint for b in self.agents],
            DT,
        )
        return None if hit is None else self.agents[hit.other].agent.id

    def reached_goal(self, prior_ego: Array) -> bool:
        start, end = prior_ego[None, :2], self.ego_pose[None, :2]
        distance = point_segment_distances(self.scene.route.end, start, end)
        return float(distance.min()) <= GOAL_RADIUS

    def progress_ratio(self) -> float:
        route = self.scene.route
        return progress_along(route, self.ego_pose[:2]) / route.length

    def executed_path(self) -> Array:
        return np.array(self.ego_poses[len(self.scene.ego.history) :]).reshape(-1, 3)


def run_episode(
    scene: Scene,
    model: CaadModel | None = None,
    horizon_steps: int = SCRIPT_STEPS,
    policy_mode: PolicyMode = PolicyMode.JOINT,
    *,
    policy: Policy | None = None,
) -> EpisodeResult:
    """Drive ``scene`` closed-loop until the goal, a collision, leaving the road or the horizon."""
    if horizon_steps < 1:
        raise ValidationError(
            "an episode needs at least one step", details={"horizon": horizon_steps}
        )
    policy = policy or make_policy(policy_mode, scene, model)
    episode = Episode(scene)
    outcome = EpisodeOutcome.TIMEOUT
    collision_agent: str | None = None
    steps = 0
    for step in range(horizon_steps):
        plan = policy.plan(episode.snapshot(), step)
        prior_ego, prior_agents = episode.step(step, plan[0])
        steps = step + 1
        collision_agent = episode.contact(prior_ego, prior_agents)
        if collision_agent is not None:
            outcome = EpisodeOutcome.COLLISION
            break
        if not point_in_polygon(episode.ego_pose[:2], scene.drivable):
            outcome = EpisodeOutcome.OFF_ROAD
            break
        if episode.reached_goal(prior_ego):
            outcome = EpisodeOutcome.SUCCESS
            break

    path = episode.executed_path()
    comfort, _ = entity_comfort(path[:, :2], scene.ego)
    progress = 1.0 if outcome == EpisodeOutcome.SUCCESS else max(episode.progress_ratio(), 0.0)
    result = EpisodeResult(
        scene_id=scene.scene_id,
        scenario_tag=scene.scenario_tag,
        policy_mode=policy.mode,
        outcome=outcome,
        progress_ratio=progress,
        steps=steps,
        comfort=comfort,
        collision_agent=collision_agent,
        path=path,
    )
    logger.debug(
        "episode_complete",
        scene_id=scene.scene_id,
        outcome=outcome.value,
        steps=steps,
        progress=progress,
    )
    return result
