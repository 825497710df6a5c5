"""Policy alignment settings."""

from pydantic import BaseModel, ConfigDict, Field

from app.model.config import SIGMA_MAX, SIGMA_MIN
from app.schemas.v1.common import AlignmentScope, AlignmentTarget


class GrpoConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    group_size: int = Field(default=8, ge=2)
    clip_epsilon: float = Field(default=0.2, gt=0.0, lt=1.0)
    eps_std: float = Field(default=1e-6, gt=0.0)
    scope: AlignmentScope = AlignmentScope.EGO
    target: AlignmentTarget = AlignmentTarget.JOINT
    # agent heads are deterministic; all-agent alignment explores with this fixed spread
    agent_sigma: float = Field(default=0.5, ge=SIGMA_MIN, le=SIGMA_MAX)
