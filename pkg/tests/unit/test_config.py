"""Unit tests for config module."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from app.core.config import LogFormat, LoggingConfig, LogLevel, RuntimeConfig, reload_settings


def test_runtime_config_defaults(monkeypatch):
    monkeypatch.delenv("CAAD_THREADS", raising=False)
    monkeypatch.delenv("CAAD_DATA_DIR", raising=False)
    config = RuntimeConfig()
    assert config.data_dir == Path(".")
    assert config.threads >= 1
    assert config.metrics_textfile is None


def test_runtime_config_env_parsing(monkeypatch, tmp_path):
    monkeypatch.setenv("CAAD_DATA_DIR", str(tmp_path))
    monkeypatch.setenv("CAAD_THREADS", "3")
    config = RuntimeConfig()
    assert config.data_dir == tmp_path
    assert config.threads == 3


def test_runtime_config_rejects_zero_threads(monkeypatch):
    monkeypatch.setenv("CAAD_THREADS", "0")
    with pytest.raises(ValidationError):
        RuntimeConfig()


def test_resolve_relative_and_absolute_paths(tmp_path):
    config = RuntimeConfig(data_dir=tmp_path)
    assert config.resolve("scenes/train.jsonl") == tmp_path / "scenes" / "train.jsonl"
    absolute = tmp_path / "elsewhere.jsonl"
    assert config.resolve(absolute) == absolute


def test_logging_config_level_is_case_insensitive():
    config = LoggingConfig(level="debug")
    assert config.level == LogLevel.DEBUG


def test_logging_config_format_env(monkeypatch):
    monkeypatch.setenv("CAAD_LOG_FORMAT", "console")
    assert LoggingConfig().format == LogFormat.CONSOLE


def test_reload_settings_picks_up_environment(monkeypatch):
    monkeypatch.setenv("CAAD_THREADS", "5")
    try:
        assert reload_settings().runtime.threads == 5
    finally:
        monkeypatch.delenv("CAAD_THREADS")
        reload_settings()
