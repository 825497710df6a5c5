"""Finite-difference check of the full network on one scene."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from app.model.features import scene_features
from app.model.network import CaadModel
from app.numerics import functional as F
from app.numerics.gradcheck import GradCheckReport, check_gradients
from app.numerics.tensor import Tensor
from app.scene.types import FUTURE_STEPS, Scene


def probe_loss(model: CaadModel, scene: Scene, seed: int = 0) -> Callable[[], Tensor]:
    """A smooth scalar touching every output head, for gradient checks."""
    features = scene_features(scene)
    target = np.random.default_rng(seed).normal(size=(FUTURE_STEPS, 2))

    def loss_fn() -> Tensor:
        out = model(features)
        loss = F.mean(F.log_softmax(out.marginal.logits))
        loss = loss + F.mean(out.marginal.trajectories**2) * 0.01
        loss = loss + F.mean((out.ego_plan.temporal - target) ** 2)
        loss = loss + F.mean(out.ego_plan.spatial**2) * 0.01
        joint = out.joint
        if joint is not None:
            loss = loss + F.mean((joint.ego_mu - target) ** 2) + F.mean(F.log(joint.ego_sigma))
            loss = loss + F.mean(F.log_softmax(joint.ego_logits))
            loss = loss + F.mean(joint.agent_trajectories**2) * 0.01
        return loss

    return loss_fn


def check_model_gradients(
    model: CaadModel, scene: Scene, *, per_parameter: int = 3, seed: int = 0
) -> GradCheckReport:
    return check_gradients(
        probe_loss(model, scene, seed),
        list(model.named_parameters()),
        per_parameter=per_parameter,
        seed=seed,
    )


def relative_error(report: GradCheckReport) -> float:
    """The worst error as ``|analytic - numeric| / (|numeric| + atol / rtol)``."""
    return report.max_error * report.rtol
