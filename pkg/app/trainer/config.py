"""Training run configuration loaded from TOML."""

from __future__ import annotations

import tomllib
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError

from app.core.errors import ConfigurationError
from app.grpo.config import GrpoConfig
from app.losses.objectives import LossWeights
from app.model.config import ModelConfig
from app.scene.kinematics import INTERACTION_MARGIN
from app.schemas.v1.common import AssignmentStrategy, SelectionCue
from app.utils.hashing import stable_digest

STAGES = (1, 2, 3)


class StageSchedule(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    stage1: int = Field(default=10, ge=0)
    stage2: int = Field(default=20, ge=0)
    stage3: int = Field(default=10, ge=0)

    def epochs(self, stage: int) -> int:
        return {1: self.stage1, 2: self.stage2, 3: self.stage3}[stage]

    @property
    def total(self) -> int:
        return self.stage1 + self.stage2 + self.stage3


class LearningRates(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    stage1: float = Field(default=1e-3, gt=0.0)
    stage2: float = Field(default=1e-3, gt=0.0)
    stage3: float = Field(default=1e-4, gt=0.0)

    def for_stage(self, stage: int) -> float:
        return {1: self.stage1, 2: self.stage2, 3: self.stage3}[stage]


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    train_scenes: Path = Path("scenes/train.jsonl")
    eval_scenes: Path | None = None


class TrainConfig(BaseModel):
    """Everything that determines a training run; an empty file gives the desk-scale defaults."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: ModelConfig = Field(default_factory=ModelConfig)
    losses: LossWeights = Field(default_factory=LossWeights)
    grpo: GrpoConfig = Field(default_factory=GrpoConfig)
    schedule: StageSchedule = Field(default_factory=StageSchedule)
    learning_rates: LearningRates = Field(default_factory=LearningRates)
    data: DataConfig = Field(default_factory=DataConfig)

    weight_decay: float = Field(default=0.01, ge=0.0)
    batch_size: int = Field(default=16, ge=1)
    seed: int = Field(default=0, ge=0)
    joint_enabled: bool = True
    selection_cue: SelectionCue = SelectionCue.SPATIAL
    assignment: AssignmentStrategy = AssignmentStrategy.EGO_CENTRIC
    threshold_margin: float = Field(default=INTERACTION_MARGIN, ge=0.0)

    def effective_model(self) -> ModelConfig:
        """The network config with the run-level joint toggle applied."""
        return self.model.model_copy(update={"joint_enabled": self.joint_enabled})

    def digest(self) -> str:
        return stable_digest(self)


def parse_train_config(raw: dict[str, Any], source: str = "<dict>") -> TrainConfig:
    try:
        return TrainConfig.model_validate(raw)
    except PydanticValidationError as e:
        errors = [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()]
        raise ConfigurationError(
            f"invalid training config {source}", details={"errors": errors}
        ) from e


def load_train_config(path: Path) -> TrainConfig:
    try:
        raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(
            f"cannot read training config: {e}", details={"path": str(path)}
        ) from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(
            f"malformed training config: {e}", details={"path": str(path)}
        ) from e
    return parse_train_config(raw, str(path))
