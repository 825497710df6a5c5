"""Common schemas: enums and file headers."""

from enum import StrEnum

from pydantic import BaseModel


class ScenarioTag(StrEnum):
    MERGE = "merge"
    CROSSING = "crossing"
    LEAD_BRAKE = "lead_brake"
    OVERTAKE = "overtake"
    FREE_FLOW = "free_flow"


class AssignmentStrategy(StrEnum):
    EGO_CENTRIC = "ego_centric"
    ALL_ACTOR = "all_actor"


class SelectionCue(StrEnum):
    SPATIAL = "spatial"
    TEMPORAL = "temporal"


class AlignmentScope(StrEnum):
    EGO = "ego"
    ALL_AGENTS = "all_agents"


class AlignmentTarget(StrEnum):
    JOINT = "joint"
    # Ablation: align the marginal ego plan instead of the joint-mode hypotheses.
    MARGINAL = "marginal"


class PolicyMode(StrEnum):
    JOINT = "joint"
    MARGINAL = "marginal"
    ORACLE = "oracle"
    STATIONARY = "stationary"


class EpisodeOutcome(StrEnum):
    SUCCESS = "success"
    COLLISION = "collision"
    OFF_ROAD = "off_road"
    TIMEOUT = "timeout"


class FileHeader(BaseModel):
    format: str
    version: int
