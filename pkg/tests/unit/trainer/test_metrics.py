"""Unit tests for per-epoch training metrics."""

import math
from dataclasses import replace

import pytest

from app.core.errors import CheckpointError, NumericError, ValidationError
from app.trainer.metrics import METRIC_COLUMNS, EpochMetrics, RunMetrics


def _row(epoch=1, **overrides):
    values = dict(
        stage=1,
        epoch=epoch,
        e2e=1.25,
        joint_reg=0.0,
        joint_cls=0.0,
        grpo=0.0,
        total=1.25,
        mean_group_reward=0.0,
        collision_rate=0.0,
        ego_min_ade=0.1,
        interaction_size=1.5,
        optimizer_steps=2 * epoch,
    )
    values.update(overrides)
    return EpochMetrics(**values)


def test_csv_has_header_and_one_line_per_epoch():
    metrics = RunMetrics()
    metrics.append(_row(1))
    metrics.append(_row(2))
    lines = metrics.to_csv().splitlines()
    assert lines[0] == ",".join(METRIC_COLUMNS)
    assert len(lines) == 3
    assert lines[1].startswith("1,1,1.25,")


def test_empty_run_writes_header_only(tmp_path):
    path = tmp_path / "metrics.csv"
    RunMetrics().write_csv(path)
    assert path.read_text() == ",".join(METRIC_COLUMNS) + "\n"


def test_non_finite_values_are_rejected():
    with pytest.raises(NumericError):
        RunMetrics().append(_row(e2e=math.nan))


def test_epochs_must_increase():
    metrics = RunMetrics()
    metrics.append(_row(2))
    with pytest.raises(ValidationError):
        metrics.append(_row(2))


def test_records_round_trip():
    metrics = RunMetrics()
    metrics.append(_row(1))
    metrics.append(replace(_row(2), grpo=-0.125))
    restored = RunMetrics.from_records(metrics.to_records())
    assert restored.to_csv() == metrics.to_csv()


def test_malformed_records_are_a_checkpoint_error():
    with pytest.raises(CheckpointError):
        RunMetrics.from_records([{"stage": 1}])
