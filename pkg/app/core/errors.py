"""CaAD error hierarchy."""

from typing import Any


class CaadError(Exception):
    """Base exception for CaAD errors."""

    code = "CAAD_INTERNAL_ERROR"

    def __init__(
        self,
        message: str,
        details: dict[str, Any] | None = None,
    ):
        self.message = message
        self.details = details
        super().__init__(message)


class ConfigurationError(CaadError):
    """Invalid configuration, flag, or preset."""

    code = "CAAD_CONFIGURATION_ERROR"


class ValidationError(CaadError):
    """Input violates a domain invariant (degenerate polygon, bad trajectory, ...)."""

    code = "CAAD_VALIDATION_ERROR"


class DimensionError(CaadError):
    """Tensor shape mismatch."""

    code = "CAAD_DIMENSION_ERROR"

    def __init__(
        self,
        message: str,
        shapes: tuple[tuple[int, ...], ...] = (),
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message, details={**(details or {}), "shapes": [list(s) for s in shapes]})
        self.shapes = shapes


class NumericError(CaadError):
    """Non-finite value encountered where a finite one is required."""

    code = "CAAD_NUMERIC_ERROR"


class TapeError(CaadError):
    """Misuse of the autodiff tape (non-scalar loss, consumed tape)."""

    code = "CAAD_TAPE_ERROR"


class ParseError(CaadError):
    """Malformed record in a line-delimited file."""

    code = "CAAD_PARSE_ERROR"

    def __init__(
        self,
        message: str,
        line_number: int,
        details: dict[str, Any] | None = None,
    ):
        super().__init__(
            f"line {line_number}: {message}",
            details={**(details or {}), "line_number": line_number},
        )
        self.line_number = line_number


class CheckpointError(CaadError):
    """Checkpoint cannot be read, has the wrong version, or mismatches the model."""

    code = "CAAD_CHECKPOINT_ERROR"


class RewardValidationError(ValidationError):
    """A rollout is too degenerate to be scored."""

    code = "CAAD_REWARD_VALIDATION_ERROR"


class TrainingDivergedError(CaadError):
    """Loss became non-finite; the last good checkpoint is retained."""

    code = "CAAD_TRAINING_DIVERGED"

    def __init__(
        self,
        message: str,
        stage: int,
        epoch: int,
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message, details={**(details or {}), "stage": stage, "epoch": epoch})
        self.stage = stage
        self.epoch = epoch


class EvaluationError(CaadError):
    """Evaluation cannot run (e.g. empty scene set)."""

    code = "CAAD_EVALUATION_ERROR"


ERROR_EXIT_MAP: dict[type[CaadError], int] = {
    ConfigurationError: 1,
    ValidationError: 2,
    DimensionError: 2,
    NumericError: 2,
    TapeError: 2,
    ParseError: 2,
    CheckpointError: 2,
    RewardValidationError: 2,
    TrainingDivergedError: 2,
    EvaluationError: 2,
}


def get_exit_code(error: CaadError) -> int:
    """Get the CLI exit code for an error."""
    return ERROR_EXIT_MAP.get(type(error), 2)
