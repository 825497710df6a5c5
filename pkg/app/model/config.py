"""Network hyperparameters."""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.errors import ConfigurationError

SIGMA_MIN = 0.05
SIGMA_MAX = 5.0


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    embed_dim: int = Field(default=64, ge=4)
    heads: int = Field(default=4, ge=1)
    ff_mult: int = Field(default=4, ge=1)
    modes: int = Field(default=6, ge=2)
    marginal_modes: int = Field(default=6, ge=1)
    encoder_rounds: int = Field(default=2, ge=0)
    refinement_rounds: int = Field(default=2, ge=0)
    joint_enabled: bool = True
    head_init_scale: float = Field(default=0.1, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def validate_heads(self) -> "ModelConfig":
        if self.embed_dim % self.heads != 0:
            raise ConfigurationError(
                f"embed_dim {self.embed_dim} is not divisible by {self.heads} heads",
                details={"embed_dim": self.embed_dim, "heads": self.heads},
            )
        return self
