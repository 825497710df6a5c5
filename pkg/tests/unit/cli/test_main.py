"""Unit tests for the caad command line."""

from __future__ import annotations

import json
from unittest.mock import patch

import pytest

from app.core.config import get_settings
from app.reward.io import load_rewards, save_rollouts
from app.scene.io import load_scenes
from app.schemas.v1.rollouts import RolloutRecord
from app.simulator.evaluation import load_report
from cli.main import main


def run(capsys, *argv: str) -> tuple[int, dict | None]:
    code = main(list(argv))
    lines = capsys.readouterr().out.strip().splitlines()
    return code, (json.loads(lines[-1]) if lines else None)


@pytest.fixture
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def scene_file(tmp_path, capsys):
    path = tmp_path / "scenes.jsonl"
    code, _ = run(capsys, "gen", "--seed", "11", "--count", "5", "--out", str(path))
    assert code == 0
    return path


def test_gen_twice_gives_identical_files(tmp_path, capsys):
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    code, result = run(capsys, "gen", "--seed", "7", "--count", "3", "--out", str(first))
    assert code == 0
    assert result["status"] == "ok"
    assert result["scenes"] == 3
    run(capsys, "gen", "--seed", "7", "--count", "3", "--out", str(second))
    assert first.read_bytes() == second.read_bytes()


def test_gen_cycles_the_requested_tags(tmp_path, capsys):
    out = tmp_path / "scenes.jsonl"
    code, result = run(
        capsys, "gen", "--count", "4", "--tags", "merge,crossing", "--out", str(out)
    )
    assert code == 0
    assert result["tags"] == {"merge": 2, "crossing": 2}
    assert [s.scenario_tag.value for s in load_scenes(out)] == [
        "merge",
        "crossing",
        "merge",
        "crossing",
    ]


def test_relative_outputs_resolve_against_data_dir(tmp_path, capsys, monkeypatch, fresh_settings):
    monkeypatch.setenv("CAAD_DATA_DIR", str(tmp_path))
    code, result = run(capsys, "gen", "--count", "1", "--out", "scenes.jsonl")
    assert code == 0
    assert (tmp_path / "scenes.jsonl").exists()
    assert result["out"] == str(tmp_path / "scenes.jsonl")


def test_unknown_flag_is_a_usage_error(capsys):
    code = main(["gen", "--count", "1", "--out", "x.jsonl", "--bogus"])
    captured = capsys.readouterr()
    assert code == 1
    assert "usage:" in captured.err
    assert captured.out == ""


def test_missing_subcommand_is_a_usage_error(capsys):
    assert main([]) == 1
    assert "usage:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["gen", "--count", "0", "--out", "x.jsonl"],
        ["gen", "--count", "2", "--tags", "roundabout", "--out", "x.jsonl"],
        ["eval", "--scenes", "s.jsonl", "--out", "r.jsonl", "--mode", "teleport"],
        ["ablate", "--config", "c.toml", "--out", "o", "--grid", "Z"],
    ],
)
def test_invalid_flag_values_are_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "error:" in capsys.readouterr().err


@pytest.mark.parametrize("command", ["gen", "train", "align", "score", "eval", "gradcheck", "ablate"])
def test_every_subcommand_has_help(command, capsys):
    assert main([command, "--help"]) == 0
    text = capsys.readouterr().out
    assert "usage: caad" in text
    assert "--" in text


def test_eval_help_documents_all_flags(capsys):
    main(["eval", "--help"])
    text = capsys.readouterr().out
    for flag in ("--checkpoint", "--scenes", "--out", "--csv", "--mode", "--horizon", "--threads"):
        assert flag in text


def test_score_ground_truth_is_collision_free_and_on_road(scene_file, tmp_path, capsys):
    out = tmp_path / "rewards.jsonl"
    code, result = run(capsys, "score", "--scene", str(scene_file), "--out", str(out))
    assert code == 0
    assert result["rollouts"] == 5
    for reward in result["rewards"]:
        assert reward["rollout_id"] == "expert"
        assert reward["nc"] == 1.0
        assert reward["dac"] == 1.0
        assert 0.0 <= reward["reward"] <= 1.0
    assert [r.reward for r in load_rewards(out)] == [r["reward"] for r in result["rewards"]]


def test_score_reads_rollout_files(scene_file, tmp_path, capsys):
    scene = load_scenes(scene_file)[0]
    rollouts = tmp_path / "rollouts.jsonl"
    stationary = [scene.ego.position.tolist()] * 8
    save_rollouts([RolloutRecord(scene_id=scene.scene_id, rollout_id="halt", points=stationary)], rollouts)
    code, result = run(capsys, "score", "--scene", str(scene_file), "--rollouts", str(rollouts))
    assert code == 0
    assert [r["rollout_id"] for r in result["rewards"]] == ["halt"]
    assert result["rewards"][0]["ep"] == 0.0


def test_score_unknown_scene_is_a_runtime_error(scene_file, tmp_path, capsys):
    rollouts = tmp_path / "rollouts.jsonl"
    save_rollouts([RolloutRecord(scene_id="missing", points=[[0.0, 0.0]] * 8)], rollouts)
    code, result = run(capsys, "score", "--scene", str(scene_file), "--rollouts", str(rollouts))
    assert code == 2
    assert result["status"] == "error"
    assert result["code"] == "CAAD_VALIDATION_ERROR"


def test_missing_input_file_is_a_runtime_error(tmp_path, capsys):
    code, result = run(capsys, "score", "--scene", str(tmp_path / "absent.jsonl"))
    assert code == 2
    assert result["code"] == "IO_ERROR"


def test_eval_oracle_needs_no_checkpoint(scene_file, tmp_path, capsys):
    out, csv_path = tmp_path / "report.jsonl", tmp_path / "report.csv"
    code, result = run(
        capsys,
        "eval",
        "--scenes",
        str(scene_file),
        "--mode",
        "oracle",
        "--out",
        str(out),
        "--csv",
        str(csv_path),
        "--threads",
        "2",
    )
    assert code == 0
    assert result["episodes"] == 5
    assert result["success_rate"] == 1.0
    episodes, summaries = load_report(out)
    assert len(episodes) == 5
    assert summaries["overall"].success_rate == 1.0
    assert csv_path.read_text().startswith("group,episodes,success_rate")


def test_eval_model_mode_without_checkpoint_is_a_configuration_error(scene_file, tmp_path, capsys):
    code, result = run(
        capsys, "eval", "--scenes", str(scene_file), "--out", str(tmp_path / "r.jsonl")
    )
    assert code == 1
    assert result["code"] == "CAAD_CONFIGURATION_ERROR"


def test_malformed_train_config_is_a_configuration_error(tmp_path, capsys):
    config = tmp_path / "train.toml"
    config.write_text("batch_size = 0\n")
    code, result = run(capsys, "train", "--config", str(config), "--out", str(tmp_path / "run"))
    assert code == 1
    assert result["code"] == "CAAD_CONFIGURATION_ERROR"


def test_gradcheck_passes_on_a_fresh_network(capsys):
    code, result = run(capsys, "gradcheck")
    assert code == 0
    assert result["status"] == "ok"
    assert result["max_relative_error"] < 1e-3
    assert result["checked"] > 0


def test_gradcheck_failure_exits_with_runtime_code(capsys):
    with patch("cli.main.relative_error", return_value=0.5):
        code, result = run(capsys, "gradcheck", "--per-parameter", "1")
    assert code == 2
    assert result["status"] == "failed"
    assert result["max_relative_error"] == 0.5


def test_metrics_textfile_is_written_on_exit(scene_file, tmp_path, capsys, monkeypatch, fresh_settings):
    textfile = tmp_path / "caad.prom"
    monkeypatch.setenv("CAAD_METRICS_TEXTFILE", str(textfile))
    code, _ = run(
        capsys, "eval", "--scenes", str(scene_file), "--mode", "stationary", "--out", str(tmp_path / "r.jsonl")
    )
    assert code == 0
    assert "caad_episodes_total" in textfile.read_text()


def test_invalid_environment_is_a_configuration_error(capsys, monkeypatch, fresh_settings):
    monkeypatch.setenv("CAAD_THREADS", "0")
    code = main(["gen", "--count", "1", "--out", "x.jsonl"])
    assert code == 1
    assert "CAAD_THREADS" in capsys.readouterr().err
