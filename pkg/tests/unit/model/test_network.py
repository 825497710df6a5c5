"""Unit tests for the joint scene-mode network."""

from dataclasses import replace

import numpy as np
import pytest

from app.model.config import SIGMA_MAX, SIGMA_MIN, ModelConfig
from app.model.features import scene_features
from app.model.network import CaadModel, agent_joint_head_parameter, bounded_sigma
from app.model.outputs import ModeStack
from app.numerics import functional as F
from app.numerics.gradcheck import check_gradients
from app.numerics.nn import Linear
from app.numerics.tensor import Tape, Tensor
from app.scene.types import FUTURE_STEPS, SPATIAL_POINTS, validate_sp
from tests.helpers import straight_scene


def _select_agents(features, order):
    rows = np.concatenate([[0], 1 + np.asarray(order, dtype=int)])
    return replace(
        features,
        entities=features.entities[rows],
        anchors=features.anchors[rows],
        current=features.current[rows],
        footprints=tuple(features.footprints[i] for i in rows),
    )


def _zero_heads(model: CaadModel) -> None:
    for value in vars(model).values():
        if isinstance(value, Linear):
            value.weight.data[...] = 0.0
            value.bias.data[...] = 0.0


def test_output_shapes(fixture_scene):
    cfg = ModelConfig(embed_dim=16, heads=2, modes=4, marginal_modes=3)
    out = CaadModel(cfg).predict(fixture_scene)

    assert out.marginal.trajectories.shape == (3, 3, FUTURE_STEPS, 2)
    assert out.marginal.logits.shape == (3, 3)
    assert out.ego_plan.temporal.shape == (FUTURE_STEPS, 2)
    assert out.ego_plan.spatial.shape == (SPATIAL_POINTS, 2)
    hyps = out.hypotheses()
    assert len(hyps) == 4
    assert all(h.agent_trajs.shape == (3, FUTURE_STEPS, 2) for h in hyps)
    assert all(np.isfinite(h.agent_mode_logits).all() for h in hyps)


def test_ego_only_scene_is_valid(empty_scene, tiny_model_config):
    out = CaadModel(tiny_model_config).predict(empty_scene)

    assert out.embeddings.agents.shape == (0, tiny_model_config.embed_dim)
    assert out.marginal.trajectories.shape[0] == 0
    assert len(out.hypotheses()) == tiny_model_config.modes
    assert out.marginal_hypothesis().agent_trajs.shape == (0, FUTURE_STEPS, 2)


def test_identical_agents_get_identical_outputs(fixture_scene, tiny_model_config):
    features = _select_agents(scene_features(fixture_scene), [0, 0])
    out = CaadModel(tiny_model_config)(features)

    agents = out.embeddings.agents.data
    np.testing.assert_allclose(agents[0], agents[1], atol=1e-12)
    trajs = out.joint.agent_trajectories.data
    np.testing.assert_allclose(trajs[0], trajs[1], atol=1e-12)


def test_agent_permutation_equivariance(fixture_scene, tiny_model_config):
    features = scene_features(fixture_scene)
    model = CaadModel(tiny_model_config)
    perm = [2, 0, 1]

    base = model(features)
    permuted = model(_select_agents(features, perm))

    np.testing.assert_allclose(
        permuted.marginal.trajectories.data, base.marginal.trajectories.data[perm], atol=1e-10
    )
    np.testing.assert_allclose(
        permuted.marginal.logits.data, base.marginal.logits.data[perm], atol=1e-10
    )
    np.testing.assert_allclose(
        permuted.joint.agent_trajectories.data,
        base.joint.agent_trajectories.data[perm],
        atol=1e-10,
    )
    np.testing.assert_allclose(permuted.joint.ego_mu.data, base.joint.ego_mu.data, atol=1e-10)


def test_zero_heads_reproduce_anchors(fixture_scene, tiny_model_config):
    model = CaadModel(tiny_model_config)
    _zero_heads(model)
    out = model.predict(fixture_scene)
    anchors = out.features.anchors

    for k in range(tiny_model_config.marginal_modes):
        np.testing.assert_array_equal(out.marginal.trajectories.data[:, k], anchors[1:])
    np.testing.assert_array_equal(out.ego_plan.temporal.data, anchors[0])
    for m in range(tiny_model_config.modes):
        np.testing.assert_array_equal(out.joint.ego_mu.data[m], anchors[0])
    np.testing.assert_array_equal(out.joint.ego_sigma.data, np.ones((3, FUTURE_STEPS, 2)))


def test_anchor_is_constant_velocity_in_ego_frame(empty_scene):
    anchors = scene_features(empty_scene).anchors
    # ego moves along +x at 8 m/s; the ego frame puts it at the origin heading +x
    expected_x = 8.0 * 0.5 * np.arange(1, FUTURE_STEPS + 1)
    np.testing.assert_allclose(anchors[0, :, 0], expected_x, atol=1e-9)
    np.testing.assert_allclose(anchors[0, :, 1], 0.0, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_spatial_plan_keeps_two_metre_spacing(fixture_scene, seed):
    model = CaadModel(ModelConfig(embed_dim=8, heads=2, seed=seed, head_init_scale=5.0))
    spatial = model.predict(fixture_scene).ego_plan.spatial.data

    validate_sp(spatial)
    np.testing.assert_allclose(spatial[0], [0.0, 0.0], atol=1e-12)


def test_sigma_is_clamped_for_extreme_raw_outputs():
    sigma = bounded_sigma(Tensor(np.array([1e6, -1e6, 0.0]))).data

    assert sigma.tolist() == [SIGMA_MAX, SIGMA_MIN, 1.0]


def test_mode_attention_preserves_shape_and_permutes_slots(tiny_model_config):
    model = CaadModel(tiny_model_config)
    rng = np.random.default_rng(4)
    m, c = tiny_model_config.modes, tiny_model_config.embed_dim
    tokens = rng.normal(size=(3, 1 + m, c))
    perm = np.concatenate([[0], 1 + rng.permutation(m)])
    block = model.mode_blocks[0]

    out = model.agent_mode_attention(ModeStack(Tensor(tokens)), block).tokens.data
    out_perm = model.agent_mode_attention(ModeStack(Tensor(tokens[:, perm])), block).tokens.data

    assert out.shape == tokens.shape
    np.testing.assert_allclose(out_perm, out[:, perm], atol=1e-10)


def test_zero_weight_mode_attention_is_identity(tiny_model_config):
    model = CaadModel(tiny_model_config)
    block = model.mode_blocks[0]
    for name, p in block.named_parameters():
        if not name.endswith("gain"):
            p.data[...] = 0.0
    tokens = np.random.default_rng(5).normal(size=(2, 1 + tiny_model_config.modes, 8))

    out = model.agent_mode_attention(ModeStack(Tensor(tokens)), block).tokens.data

    np.testing.assert_array_equal(out, tokens)


@pytest.mark.parametrize("seed", range(3))
def test_refined_stacks_stay_finite(fixture_scene, seed):
    model = CaadModel(ModelConfig(embed_dim=16, heads=4, seed=seed))
    features = scene_features(fixture_scene)
    stack = model.refine(model.initial_stacks(model.encode(features)))

    assert stack.tokens.shape == (4, 1 + 6, 16)
    assert np.isfinite(stack.tokens.data).all()


def test_forward_is_deterministic(fixture_scene, tiny_model_config):
    a = CaadModel(tiny_model_config).predict(fixture_scene)
    b = CaadModel(tiny_model_config).predict(fixture_scene)

    np.testing.assert_array_equal(a.joint.ego_mu.data, b.joint.ego_mu.data)
    np.testing.assert_array_equal(a.marginal.logits.data, b.marginal.logits.data)


def test_gradient_reaches_joint_mode_embeddings(fixture_scene, tiny_model_config):
    model = CaadModel(tiny_model_config)
    features = scene_features(fixture_scene)
    with Tape() as tape:
        loss = F.sum(model(features).joint.ego_mu * 0.1)
    tape.backward(loss)

    assert np.abs(model.ego_modes.grad).sum() > 0.0
    assert np.abs(model.agent_modes.grad).sum() > 0.0
    assert model.joint_agent_head.weight.grad is None


def test_disabled_joint_part_has_no_mode_parameters(fixture_scene):
    model = CaadModel(ModelConfig(embed_dim=8, heads=2, joint_enabled=False))
    out = model.predict(fixture_scene)

    assert out.joint is None
    assert out.hypotheses() == []
    assert not any("modes" in name for name, _ in model.named_parameters())


def test_agent_joint_head_names(tiny_model_config):
    names = [n for n, _ in CaadModel(tiny_model_config).named_parameters()]
    frozen = [n for n in names if agent_joint_head_parameter(n)]

    assert sorted(frozen) == [
        "joint_agent_head.bias",
        "joint_agent_head.weight",
        "joint_agent_logit.bias",
        "joint_agent_logit.weight",
    ]


def test_end_to_end_gradients_match_finite_differences(fixture_scene, tiny_model_config):
    model = CaadModel(tiny_model_config)
    features = scene_features(fixture_scene)
    target = np.random.default_rng(9).normal(size=(FUTURE_STEPS, 2))

    def loss_fn():
        out = model(features)
        joint = out.joint
        fit = F.mean((joint.ego_mu - target) ** 2) + F.mean(F.log(joint.ego_sigma))
        scores = F.mean(F.log_softmax(joint.ego_logits)) + F.mean(F.log_softmax(out.marginal.logits))
        agents = F.mean(joint.agent_trajectories**2) * 0.01
        spatial = F.mean(out.ego_plan.spatial**2) * 0.01
        return fit + scores + agents + spatial

    report = check_gradients(loss_fn, list(model.named_parameters()), per_parameter=3)

    assert report.passed, report


def test_straight_scene_features_are_finite():
    features = scene_features(straight_scene())
    assert np.isfinite(features.entities).all()
    assert np.isfinite(features.map).all()
