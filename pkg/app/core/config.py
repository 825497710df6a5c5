"""Runtime configuration for the CaAD training stack.

Configuration is loaded from environment variables. Training runs are
described separately by a TOML file (see ``app.trainer.config``).
"""

from __future__ import annotations

import os
from enum import StrEnum
from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def _available_cores() -> int:
    return max(1, os.cpu_count() or 1)


class LogLevel(StrEnum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogFormat(StrEnum):
    JSON = "json"
    CONSOLE = "console"


class RuntimeConfig(BaseSettings):
    data_dir: Path = Field(default=Path("."))
    threads: int = Field(default_factory=_available_cores)
    metrics_textfile: Path | None = Field(default=None)

    model_config = SettingsConfigDict(env_prefix="CAAD_")

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("CAAD_THREADS must be >= 1")
        return v

    def resolve(self, path: str | Path) -> Path:
        """Resolve a relative data path against the configured data directory."""
        candidate = Path(path)
        if candidate.is_absolute():
            return candidate
        return self.data_dir / candidate


class LoggingConfig(BaseSettings):
    level: LogLevel = Field(default=LogLevel.INFO)
    format: LogFormat = Field(default=LogFormat.JSON)

    model_config = SettingsConfigDict(env_prefix="CAAD_LOG_")

    @field_validator("level", mode="before")
    @classmethod
    def validate_level(cls, v: str | LogLevel) -> LogLevel:
        if isinstance(v, LogLevel):
            return v
        return LogLevel(str(v).upper())


class Settings(BaseSettings):
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


@lru_cache
def get_settings() -> Settings:
    return Settings()


def reload_settings() -> Settings:
    get_settings.cache_clear()
    return get_settings()
