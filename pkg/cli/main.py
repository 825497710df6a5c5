"""``caad`` command-line entry point.

Every subcommand prints one JSON result object on stdout; logs go to
stderr. Exit codes: 0 success, 1 usage or configuration error, 2 runtime
error.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NoReturn

import orjson
import structlog
from pydantic import ValidationError as PydanticValidationError

from app.core.config import Settings, get_settings
from app.core.errors import CaadError, ConfigurationError, get_exit_code
from app.core.logging import setup_logging
from app.core.metrics import export_textfile
from app.core.tracing import clear_run_context, set_run_id
from app.model.checkpoint import load_checkpoint, restore_model
from app.model.config import ModelConfig
from app.model.diagnostics import check_model_gradients, relative_error
from app.model.network import CaadModel
from app.reward.io import expert_rollout_records, load_rollouts, save_rewards, score_records
from app.scene.generator import generate_scene, generate_scenes
from app.scene.io import load_scenes, save_scenes
from app.scene.transforms import ego_frame_transform
from app.scene.types import SCRIPT_STEPS
from app.schemas.v1.common import PolicyMode, ScenarioTag
from app.simulator.evaluation import evaluate, write_report
from app.trainer.config import load_train_config
from app.trainer.loop import align, load_training_scenes, train
from cli.ablation import PRESETS, resolve_presets, run_ablation

logger = structlog.get_logger(__name__)

USAGE_EXIT = 1
RUNTIME_EXIT = 2
GRADCHECK_TOLERANCE = 1e-3
DEFAULT_GRID = ["base", "A", "B", "C", "D", "E"]

GRADCHECK_MODEL = ModelConfig(
    embed_dim=8,
    heads=2,
    ff_mult=2,
    modes=3,
    marginal_modes=2,
    encoder_rounds=1,
    refinement_rounds=2,
)

Handler = Callable[[argparse.Namespace, Settings], dict[str, Any]]


class CaadArgumentParser(argparse.ArgumentParser):
    """Usage errors print the usage line to stderr and exit with status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from exc
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {number}")
    return number


def _tags(value: str) -> list[ScenarioTag]:
    names = [name.strip() for name in value.split(",") if name.strip()]
    try:
        return [ScenarioTag(name) for name in names]
    except ValueError as exc:
        known = ", ".join(t.value for t in ScenarioTag)
        raise argparse.ArgumentTypeError(
            f"unknown scenario tag in {value!r} (known: {known})"
        ) from exc


def _threads(args: argparse.Namespace, settings: Settings) -> int:
    return args.threads or settings.runtime.threads


def _ok(command: str, **fields: Any) -> dict[str, Any]:
    return {"command": command, "status": "ok", **fields}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _gen(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    out = settings.runtime.resolve(args.out)
    scenes = generate_scenes(args.seed, args.count, args.tags)
    count = save_scenes(scenes, out)
    by_tag: dict[str, int] = {}
    for scene in scenes:
        by_tag[scene.scenario_tag.value] = by_tag.get(scene.scenario_tag.value, 0) + 1
    return _ok("gen", scenes=count, tags=by_tag, out=str(out))


def _train(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    config = load_train_config(args.config)
    scenes = (
        load_scenes(settings.runtime.resolve(args.scenes))
        if args.scenes
        else load_training_scenes(config)
    )
    result = train(
        config,
        settings.runtime.resolve(args.out),
        scenes=scenes,
        resume=settings.runtime.resolve(args.resume) if args.resume else None,
        threads=_threads(args, settings),
        max_epochs=args.max_epochs,
    )
    return _ok(
        "train",
        epochs=len(result.metrics.rows),
        checkpoint=str(result.checkpoint),
        metrics=str(result.metrics_path),
    )


def _align(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    config = load_train_config(args.config)
    scenes = (
        load_scenes(settings.runtime.resolve(args.scenes))
        if args.scenes
        else load_training_scenes(config)
    )
    result = align(
        config,
        settings.runtime.resolve(args.checkpoint),
        settings.runtime.resolve(args.out),
        scenes=scenes,
        threads=_threads(args, settings),
        max_epochs=args.max_epochs,
    )
    return _ok(
        "align",
        epochs=len(result.metrics.rows),
        checkpoint=str(result.checkpoint),
        metrics=str(result.metrics_path),
    )


def _score(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    scenes = load_scenes(settings.runtime.resolve(args.scene))
    rollouts = (
        load_rollouts(settings.runtime.resolve(args.rollouts))
        if args.rollouts
        else expert_rollout_records(scenes)
    )
    records = score_records(scenes, rollouts)
    fields: dict[str, Any] = {}
    if args.out:
        out = settings.runtime.resolve(args.out)
        save_rewards(records, out)
        fields["out"] = str(out)
    return _ok(
        "score",
        rollouts=len(records),
        rewards=[r.model_dump(mode="json") for r in records],
        **fields,
    )


def _eval(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    mode = PolicyMode(args.mode)
    model = None
    if args.checkpoint:
        model = restore_model(load_checkpoint(settings.runtime.resolve(args.checkpoint)))
    elif mode in (PolicyMode.JOINT, PolicyMode.MARGINAL):
        raise ConfigurationError(f"--mode {mode.value} needs --checkpoint")
    scenes = load_scenes(settings.runtime.resolve(args.scenes))
    report = evaluate(
        scenes, model, mode=mode, horizon_steps=args.horizon, threads=_threads(args, settings)
    )
    out = settings.runtime.resolve(args.out)
    csv_path = settings.runtime.resolve(args.csv) if args.csv else None
    write_report(report, out, csv_path)
    overall = report.overall
    return _ok(
        "eval",
        mode=mode.value,
        episodes=overall.episodes,
        success_rate=overall.success_rate,
        collision_rate=overall.collision_rate,
        off_road_rate=overall.off_road_rate,
        driving_score=overall.driving_score,
        out=str(out),
    )


def _gradcheck(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    model_config = (
        load_train_config(args.config).effective_model() if args.config else GRADCHECK_MODEL
    )
    model = CaadModel(model_config.model_copy(update={"seed": args.seed}))
    scene = ego_frame_transform(generate_scene(args.seed, args.tag))
    report = check_model_gradients(model, scene, per_parameter=args.per_parameter, seed=args.seed)
    error = relative_error(report)
    passed = error < GRADCHECK_TOLERANCE
    logger.info("gradcheck_complete", max_relative_error=error, checked=report.checked)
    return {
        "command": "gradcheck",
        "status": "ok" if passed else "failed",
        "max_relative_error": error,
        "tolerance": GRADCHECK_TOLERANCE,
        "checked": report.checked,
        "worst_parameter": report.worst_parameter,
        "worst_index": list(report.worst_index) if report.worst_index is not None else None,
    }


def _ablate(args: argparse.Namespace, settings: Settings) -> dict[str, Any]:
    config = load_train_config(args.config)
    presets = resolve_presets(args.grid)
    train_scenes = (
        load_scenes(settings.runtime.resolve(args.scenes))
        if args.scenes
        else load_training_scenes(config)
    )
    eval_path = args.eval_scenes or config.data.eval_scenes
    if eval_path is None:
        raise ConfigurationError("ablation needs --eval-scenes or data.eval_scenes in the config")
    eval_scenes = load_scenes(settings.runtime.resolve(eval_path))
    out = settings.runtime.resolve(args.out)
    result = run_ablation(
        config,
        presets,
        args.seeds,
        train_scenes,
        eval_scenes,
        out,
        threads=_threads(args, settings),
    )
    return _ok(
        "ablate",
        seeds=list(args.seeds),
        median_success_rate={p: result.median_success(p) for p in result.presets()},
        median_driving_score={p: result.median_driving_score(p) for p in result.presets()},
        out=str(out),
    )


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_threads(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threads",
        type=_positive_int,
        default=None,
        help="worker threads (default: CAAD_THREADS or the number of cores)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = CaadArgumentParser(
        prog="caad", description="Causality-aware driving: data, training, scoring, evaluation"
    )
    parser.add_argument("--run-id", default=None, help="run id bound to every log line")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    gen = commands.add_parser("gen", help="generate a scene file")
    gen.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    gen.add_argument("--count", type=_positive_int, required=True, help="number of scenes")
    gen.add_argument(
        "--tags",
        type=_tags,
        default=None,
        help="comma-separated scenario tags to cycle through (default: all)",
    )
    gen.add_argument("--out", type=Path, required=True, help="scene file to write")
    gen.set_defaults(handler=_gen)

    train_cmd = commands.add_parser("train", help="run the staged training schedule")
    train_cmd.add_argument("--config", type=Path, required=True, help="training config (TOML)")
    train_cmd.add_argument("--out", type=Path, required=True, help="output directory")
    train_cmd.add_argument("--scenes", type=Path, default=None, help="override data.train_scenes")
    train_cmd.add_argument("--resume", type=Path, default=None, help="checkpoint to continue from")
    train_cmd.add_argument(
        "--max-epochs", type=_positive_int, default=None, help="stop after this many epochs"
    )
    _add_threads(train_cmd)
    train_cmd.set_defaults(handler=_train)

    align_cmd = commands.add_parser("align", help="policy alignment only, from a checkpoint")
    align_cmd.add_argument("--config", type=Path, required=True, help="training config (TOML)")
    align_cmd.add_argument("--checkpoint", type=Path, required=True, help="model checkpoint")
    align_cmd.add_argument("--out", type=Path, required=True, help="output directory")
    align_cmd.add_argument("--scenes", type=Path, default=None, help="override data.train_scenes")
    align_cmd.add_argument(
        "--max-epochs", type=_positive_int, default=None, help="stop after this many epochs"
    )
    _add_threads(align_cmd)
    align_cmd.set_defaults(handler=_align)

    score = commands.add_parser("score", help="score rollouts with the driving reward")
    score.add_argument("--scene", type=Path, required=True, help="scene file")
    score.add_argument(
        "--rollouts",
        type=Path,
        default=None,
        help="rollout file (default: each scene's ground-truth ego future)",
    )
    score.add_argument("--out", type=Path, default=None, help="reward file to write")
    score.set_defaults(handler=_score)

    eval_cmd = commands.add_parser("eval", help="closed-loop evaluation")
    eval_cmd.add_argument(
        "--checkpoint", type=Path, default=None, help="model checkpoint (joint/marginal modes)"
    )
    eval_cmd.add_argument("--scenes", type=Path, required=True, help="scene file")
    eval_cmd.add_argument("--out", type=Path, required=True, help="evaluation report to write")
    eval_cmd.add_argument("--csv", type=Path, default=None, help="also write a summary CSV")
    eval_cmd.add_argument(
        "--mode",
        choices=[m.value for m in PolicyMode],
        default=PolicyMode.JOINT.value,
        help="ego policy (default: joint)",
    )
    eval_cmd.add_argument(
        "--horizon",
        type=_positive_int,
        default=SCRIPT_STEPS,
        help=f"episode length in steps (default: {SCRIPT_STEPS})",
    )
    _add_threads(eval_cmd)
    eval_cmd.set_defaults(handler=_eval)

    grad = commands.add_parser("gradcheck", help="finite-difference check of a fresh network")
    grad.add_argument("--seed", type=int, default=0, help="model and scene seed (default: 0)")
    grad.add_argument(
        "--tag",
        choices=[t.value for t in ScenarioTag],
        default=ScenarioTag.LEAD_BRAKE.value,
        help="scenario of the checked scene (default: lead_brake)",
    )
    grad.add_argument(
        "--per-parameter",
        type=_positive_int,
        default=3,
        help="elements checked per parameter (default: 3)",
    )
    grad.add_argument(
        "--config", type=Path, default=None, help="check this training config's network instead"
    )
    grad.set_defaults(handler=_gradcheck)

    ablate = commands.add_parser("ablate", help="train and evaluate the component grid")
    ablate.add_argument("--config", type=Path, required=True, help="base training config (TOML)")
    ablate.add_argument(
        "--grid",
        nargs="+",
        choices=list(PRESETS),
        default=DEFAULT_GRID,
        help="presets to run (default: base A B C D E)",
    )
    ablate.add_argument(
        "--seeds", type=int, nargs="+", default=[0], help="training seeds (default: 0)"
    )
    ablate.add_argument("--scenes", type=Path, default=None, help="override data.train_scenes")
    ablate.add_argument(
        "--eval-scenes", type=Path, default=None, help="override data.eval_scenes"
    )
    ablate.add_argument("--out", type=Path, required=True, help="output directory")
    _add_threads(ablate)
    ablate.set_defaults(handler=_ablate)

    return parser


def _emit(result: dict[str, Any]) -> None:
    sys.stdout.write(orjson.dumps(result).decode("utf-8") + "\n")
    sys.stdout.flush()


def _settings() -> Settings:
    try:
        return get_settings()
    except PydanticValidationError as e:
        errors = [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()]
        raise ConfigurationError("invalid environment settings", details={"errors": errors}) from e


def _fail(command: str, error: CaadError) -> int:
    logger.error(
        "command_failed",
        command=command,
        code=error.code,
        error=error.message,
        details=error.details,
    )
    _emit({"command": command, "status": "error", "code": error.code, "error": error.message})
    return get_exit_code(error)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT

    try:
        settings = _settings()
    except ConfigurationError as e:
        errors = "; ".join((e.details or {}).get("errors", []))
        sys.stderr.write(f"caad: {e.message}: {errors}\n")
        return get_exit_code(e)

    setup_logging()
    try:
        set_run_id(args.run_id)
        handler: Handler = args.handler
        result = handler(args, settings)
    except CaadError as e:
        return _fail(args.command, e)
    except OSError as e:
        logger.error("command_failed", command=args.command, error=str(e))
        _emit({"command": args.command, "status": "error", "code": "IO_ERROR", "error": str(e)})
        return RUNTIME_EXIT
    finally:
        if settings.runtime.metrics_textfile is not None:
            export_textfile(settings.runtime.metrics_textfile)
        clear_run_context()

    _emit(result)
    return 0 if result["status"] == "ok" else RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
