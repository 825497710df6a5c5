"""Three-stage training loop.

Stage 1 fits the marginal end-to-end objective, stage 2 adds the joint
objective under the mode assignment, stage 3 adds policy alignment. Every
epoch ends in a checkpoint, so an interrupted run resumes from the last
completed epoch and continues bit-identically.
"""

from __future__ import annotations

import time
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from app.assignment.interaction import select_interaction_set
from app.assignment.modes import assign_modes, best_candidates, masked_distance
from app.assignment.targets import SceneTargets, scene_targets
from app.core.config import get_settings
from app.core.errors import CheckpointError, NumericError, TrainingDivergedError, ValidationError
from app.core.metrics import (
    caad_optimizer_steps_total,
    caad_train_epoch_seconds,
    caad_train_epochs_total,
)
from app.core.tracing import set_stage, span
from app.grpo.align import AlignmentResult, align_outputs
from app.losses.objectives import (
    LossReport,
    LossWeights,
    e2e_loss,
    joint_cls_loss,
    joint_reg_loss,
    total_loss,
)
from app.model.checkpoint import (
    Checkpoint,
    load_checkpoint,
    load_model_state,
    model_state,
    restore_model,
    save_checkpoint,
)
from app.model.network import CaadModel, agent_joint_head_parameter
from app.model.outputs import ModelOutput
from app.numerics import functional as F
from app.numerics.tensor import Tape, Tensor
from app.scene.io import load_scenes
from app.scene.transforms import ego_frame_transform
from app.scene.types import Scene
from app.schemas.v1.common import AlignmentScope
from app.trainer.config import STAGES, TrainConfig
from app.trainer.metrics import EpochMetrics, RunMetrics
from app.trainer.optimizer import AdamW

logger = structlog.get_logger(__name__)

CHECKPOINT_FORMAT = "caad-train"
CHECKPOINT_NAME = "model.ckpt"
METRICS_NAME = "metrics.csv"

# seed-sequence salts keeping the shuffle and rollout streams independent
SHUFFLE_STREAM = 1
ALIGN_STREAM = 2


def _never(name: str) -> bool:
    return False


def ego_min_ade(output: ModelOutput, targets: SceneTargets) -> float:
    """Best ego displacement error over the joint modes, or of the marginal plan."""
    hyps = output.hypotheses()
    if hyps:
        return min(masked_distance(h.ego_traj, targets.ego_tp) for h in hyps)
    return masked_distance(output.ego_plan.temporal.data, targets.ego_tp)


@dataclass(frozen=True)
class _SceneTerms:
    e2e: Tensor
    joint_reg: Tensor
    joint_cls: Tensor
    min_ade: float
    interaction_size: int


@dataclass(frozen=True)
class _BatchStats:
    report: LossReport
    alignment: AlignmentResult | None
    min_ade: list[float]
    interaction_sizes: list[int]


def _mean_tensor(terms: list[Tensor]) -> Tensor:
    return F.mean(F.stack(terms)) if terms else Tensor(0.0)


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else 0.0


class Trainer:
    """Owns the model, optimizer and metrics history of one training run."""

    def __init__(
        self,
        config: TrainConfig,
        scenes: Sequence[Scene],
        *,
        stages: Sequence[int] = STAGES,
        threads: int = 1,
        model: CaadModel | None = None,
    ) -> None:
        if not scenes:
            raise ValidationError("training needs at least one scene")
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ValidationError("unknown training stage", details={"stages": unknown})
        self.config = config
        self.scenes = [ego_frame_transform(scene) for scene in scenes]
        self.stages = tuple(stages)
        self.threads = threads
        self.model = model or CaadModel(config.effective_model())
        self.optimizer = AdamW(
            list(self.model.named_parameters()),
            lr=config.learning_rates.for_stage(self.stages[0]) if self.stages else 0.0,
            weight_decay=config.weight_decay,
        )
        self.metrics = RunMetrics()
        self.completed = 0

    def plan(self) -> list[tuple[int, int]]:
        """``(stage, epoch-within-stage)`` for every epoch of the run, in order."""
        return [
            (stage, epoch)
            for stage in self.stages
            for epoch in range(self.config.schedule.epochs(stage))
        ]

    def stage_weights(self, stage: int) -> LossWeights:
        w = self.config.losses
        return w.model_copy(
            update={
                "lambda_joint": w.lambda_joint if stage >= 2 else 0.0,
                "lambda_rl": w.lambda_rl if stage == 3 else 0.0,
            }
        )

    def _configure_stage(self, stage: int) -> None:
        self.optimizer.lr = self.config.learning_rates.for_stage(stage)
        ego_scope = self.config.grpo.scope == AlignmentScope.EGO
        self.optimizer.frozen = agent_joint_head_parameter if stage == 3 and ego_scope else _never
        set_stage(stage)

    def _scene_terms(self, stage: int, scene: Scene, output: ModelOutput) -> _SceneTerms:
        cfg = self.config
        targets = scene_targets(scene)
        k_star = best_candidates(output.marginal, targets.agents, targets.valid)
        e2e = e2e_loss(output, targets, k_star, cfg.losses)
        joint_reg = joint_cls = Tensor(0.0)
        size = 0
        if stage >= 2 and output.joint is not None:
            interaction = select_interaction_set(
                scene,
                output.marginal,
                targets.ego_sp,
                cfg.threshold_margin,
                cue=cfg.selection_cue,
                ego_tp_gt=targets.ego_tp,
            )
            assignment = assign_modes(
                output.hypotheses(),
                targets.ego_tp,
                output.marginal,
                targets.agents,
                targets.valid,
                interaction,
                cfg.assignment,
            )
            joint_reg = joint_reg_loss(
                output.joint, output.marginal, assignment, interaction, targets
            )
            joint_cls = joint_cls_loss(
                output.joint, output.marginal.logits, assignment, interaction, cfg.losses
            )
            size = len(interaction)
        return _SceneTerms(e2e, joint_reg, joint_cls, ego_min_ade(output, targets), size)

    def _train_batch(
        self, stage: int, batch: Sequence[Scene], rng: np.random.Generator
    ) -> _BatchStats:
        weights = self.stage_weights(stage)
        self.optimizer.zero_grad()
        with Tape() as tape:
            outputs = [self.model.predict(scene) for scene in batch]
            terms = [self._scene_terms(stage, s, o) for s, o in zip(batch, outputs, strict=True)]
            alignment = None
            grpo = Tensor(0.0)
            if stage == 3 and weights.lambda_rl > 0.0:
                alignment = align_outputs(
                    list(zip(batch, outputs, strict=True)),
                    self.config.grpo,
                    rng,
                    threads=self.threads,
                )
                grpo = alignment.loss
            loss, report = total_loss(
                _mean_tensor([t.e2e for t in terms]),
                _mean_tensor([t.joint_reg for t in terms]),
                _mean_tensor([t.joint_cls for t in terms]),
                grpo,
                weights,
            )
            tape.backward(loss)
        for name, p in self.optimizer.params:
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise NumericError("non-finite gradient", details={"parameter": name})
        self.optimizer.step()
        caad_optimizer_steps_total.labels(stage=str(stage)).inc()
        return _BatchStats(
            report=report,
            alignment=alignment,
            min_ade=[t.min_ade for t in terms],
            interaction_sizes=[t.interaction_size for t in terms],
        )

    def _train_epoch(self, index: int, stage: int, epoch: int) -> EpochMetrics:
        seed = self.config.seed
        order = np.random.default_rng([seed, SHUFFLE_STREAM, stage, epoch]).permutation(
            len(self.scenes)
        )
        size = self.config.batch_size
        stats: list[_BatchStats] = []
        started = time.perf_counter()
        with span("trainer.epoch", stage=stage, epoch=epoch):
            for b, start in enumerate(range(0, len(order), size)):
                batch = [self.scenes[i] for i in order[start : start + size]]
                rng = np.random.default_rng([seed, ALIGN_STREAM, stage, epoch, b])
                try:
                    stats.append(self._train_batch(stage, batch, rng))
                except NumericError as e:
                    logger.error(
                        "training_diverged", stage=stage, epoch=epoch, batch=b, reason=e.message
                    )
                    raise TrainingDivergedError(
                        f"training diverged in stage {stage}: {e.message}",
                        stage=stage,
                        epoch=epoch,
                        details=e.details,
                    ) from e
        caad_train_epoch_seconds.labels(stage=str(stage)).observe(time.perf_counter() - started)
        caad_train_epochs_total.labels(stage=str(stage)).inc()

        aligned = [s.alignment for s in stats if s.alignment is not None and s.alignment.groups]
        return EpochMetrics(
            stage=stage,
            epoch=index + 1,
            e2e=_mean([s.report.e2e for s in stats]),
            joint_reg=_mean([s.report.joint_reg for s in stats]),
            joint_cls=_mean([s.report.joint_cls for s in stats]),
            grpo=_mean([s.report.grpo for s in stats]),
            total=_mean([s.report.total for s in stats]),
            mean_group_reward=_mean([a.mean_reward for a in aligned]),
            collision_rate=_mean([a.collision_rate for a in aligned]),
            ego_min_ade=_mean([v for s in stats for v in s.min_ade]),
            interaction_size=_mean([v for s in stats for v in s.interaction_sizes]),
            optimizer_steps=self.optimizer.steps,
        )

    def epochs(self, max_epochs: int | None = None) -> Iterator[EpochMetrics]:
        """Train the remaining epochs one at a time, yielding each epoch's metrics."""
        ran = 0
        try:
            for index, (stage, epoch) in enumerate(self.plan()):
                if index < self.completed:
                    continue
                if max_epochs is not None and ran >= max_epochs:
                    return
                self._configure_stage(stage)
                row = self._train_epoch(index, stage, epoch)
                self.metrics.append(row)
                self.completed += 1
                ran += 1
                logger.info("epoch_complete", **row.as_row())
                yield row
        finally:
            set_stage(None)

    def run(
        self, checkpoint_path: Path | None = None, max_epochs: int | None = None
    ) -> RunMetrics:
        if checkpoint_path is not None and self.completed == 0:
            save_checkpoint(checkpoint_path, self.checkpoint())
        for _ in self.epochs(max_epochs):
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, self.checkpoint())
        return self.metrics

    def checkpoint(self) -> Checkpoint:
        blocks = {f"model/{name}": arr for name, arr in model_state(self.model).items()}
        blocks.update(self.optimizer.state_blocks())
        return Checkpoint(
            blocks=blocks,
            metadata={
                "format": CHECKPOINT_FORMAT,
                "config_digest": self.config.digest(),
                "model_config": self.model.config.model_dump(mode="json"),
                "stages": list(self.stages),
                "completed_epochs": self.completed,
                "optimizer_steps": self.optimizer.steps,
                "metrics": self.metrics.to_records(),
            },
        )

    @classmethod
    def resume(
        cls,
        config: TrainConfig,
        scenes: Sequence[Scene],
        checkpoint: Checkpoint,
        *,
        threads: int = 1,
    ) -> Trainer:
        """Rebuild a run from its last checkpoint; the config must be the one that wrote it."""
        meta = checkpoint.metadata
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError("checkpoint was not written by a training run")
        if meta.get("config_digest") != config.digest():
            raise CheckpointError(
                "checkpoint was written under a different training config",
                details={"expected": config.digest(), "found": meta.get("config_digest")},
            )
        metrics = RunMetrics.from_records(meta.get("metrics", []))
        trainer = cls(config, scenes, stages=meta.get("stages", STAGES), threads=threads)
        load_model_state(trainer.model, checkpoint.section("model"))
        trainer.optimizer.load_state(
            checkpoint.section("adam_m"),
            checkpoint.section("adam_v"),
            int(meta.get("optimizer_steps", 0)),
        )
        trainer.metrics = metrics
        trainer.completed = int(meta.get("completed_epochs", 0))
        logger.info("training_resumed", completed_epochs=trainer.completed)
        return trainer

    @classmethod
    def for_alignment(
        cls,
        config: TrainConfig,
        scenes: Sequence[Scene],
        checkpoint: Checkpoint,
        *,
        threads: int = 1,
    ) -> Trainer:
        """A stage-3-only run starting from a trained model; optimizer state starts fresh."""
        return cls(config, scenes, stages=(3,), threads=threads, model=restore_model(checkpoint))


@dataclass(frozen=True)
class TrainingResult:
    checkpoint: Path
    metrics_path: Path
    metrics: RunMetrics


def load_training_scenes(config: TrainConfig) -> list[Scene]:
    return load_scenes(get_settings().runtime.resolve(config.data.train_scenes))


def _finish(trainer: Trainer, out_dir: Path, max_epochs: int | None) -> TrainingResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / CHECKPOINT_NAME
    metrics_path = out_dir / METRICS_NAME
    logger.info(
        "training_started",
        scenes=len(trainer.scenes),
        stages=list(trainer.stages),
        epochs=len(trainer.plan()),
        completed=trainer.completed,
        config_digest=trainer.config.digest(),
    )
    metrics = trainer.run(checkpoint_path, max_epochs)
    metrics.write_csv(metrics_path)
    logger.info("training_complete", epochs=len(metrics.rows), checkpoint=str(checkpoint_path))
    return TrainingResult(checkpoint=checkpoint_path, metrics_path=metrics_path, metrics=metrics)


def train(
    config: TrainConfig,
    out_dir: Path,
    *,
    scenes: Sequence[Scene] | None = None,
    resume: Path | None = None,
    threads: int = 1,
    max_epochs: int | None = None,
) -> TrainingResult:
    """Run (or continue) the staged schedule, writing ``model.ckpt`` and ``metrics.csv``."""
    scenes = list(scenes) if scenes is not None else load_training_scenes(config)
    if resume is not None:
        trainer = Trainer.resume(config, scenes, load_checkpoint(resume), threads=threads)
    else:
        trainer = Trainer(config, scenes, threads=threads)
    return _finish(trainer, out_dir, max_epochs)


def align(
    config: TrainConfig,
    checkpoint_path: Path,
    out_dir: Path,
    *,
    scenes: Sequence[Scene] | None = None,
    threads: int = 1,
    max_epochs: int | None = None,
) -> TrainingResult:
    """Policy-alignment stage alone, starting from a checkpoint's model weights."""
    scenes = list(scenes) if scenes is not None else load_training_scenes(config)
    checkpoint = load_checkpoint(checkpoint_path)
    trainer = Trainer.for_alignment(config, scenes, checkpoint, threads=threads)
    return _finish(trainer, out_dir, max_epochs)
