"""The joint scene-mode network.

A shared history encoder and a map encoder feed self-attention over
``[ego, agents..., map]`` tokens. Each entity then carries a stack of its
decoded embedding plus ``M`` learned joint-mode tokens; refinement alternates
attention across entities (per mode slot) with attention across the mode
axis (per entity). Slot 0 feeds the marginal heads, slots ``1..M`` the joint
heads. All trajectory heads predict offsets from a constant-velocity anchor.
"""

from __future__ import annotations

import math

import numpy as np
import structlog

from app.model.config import SIGMA_MAX, SIGMA_MIN, ModelConfig
from app.model.features import ENTITY_FEATURES, MAP_FEATURES, FeatureSet, scene_features
from app.model.outputs import (
    EgoPlan,
    JointPrediction,
    MarginalEmbeddings,
    MarginalPredictionSet,
    ModelOutput,
    ModeStack,
)
from app.numerics import functional as F
from app.numerics.nn import MLP, Linear, Module, SelfAttentionBlock
from app.numerics.tensor import Parameter, Tensor
from app.scene.types import FUTURE_STEPS, SPATIAL_POINTS, SPATIAL_SPACING, Scene

logger = structlog.get_logger(__name__)

LOG_SIGMA_MIN = math.log(SIGMA_MIN)
LOG_SIGMA_MAX = math.log(SIGMA_MAX)

# Parameters updated only by supervised agent terms; frozen during ego-scope alignment.
AGENT_JOINT_HEAD_PREFIXES = ("joint_agent_head.", "joint_agent_logit.")


def bounded_sigma(raw: Tensor) -> Tensor:
    """Positive spread in ``[SIGMA_MIN, SIGMA_MAX]`` for any finite raw output."""
    inner = F.clip(raw, LOG_SIGMA_MIN - 1.0, LOG_SIGMA_MAX + 1.0)
    return F.clip(F.exp(inner), SIGMA_MIN, SIGMA_MAX)


class CaadModel(Module):
    def __init__(self, config: ModelConfig | None = None) -> None:
        self.config = config or ModelConfig()
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        c, t = cfg.embed_dim, FUTURE_STEPS
        scale = cfg.head_init_scale

        def block() -> SelfAttentionBlock:
            return SelfAttentionBlock(c, rng, heads=cfg.heads, ff_mult=cfg.ff_mult)

        self.entity_encoder = MLP(ENTITY_FEATURES, c, c, rng)
        self.map_encoder = MLP(MAP_FEATURES, c, c, rng)
        self.ego_type = Parameter(rng.normal(0.0, 0.1, size=c))
        self.encoder_blocks = [block() for _ in range(cfg.encoder_rounds)]

        k = cfg.marginal_modes
        self.agent_traj_head = Linear(c, k * t * 2, rng, init_scale=scale)
        self.agent_logit_head = Linear(c, k, rng, init_scale=scale)
        self.ego_temporal_head = Linear(c, t * 2, rng, init_scale=scale)
        self.ego_spatial_head = Linear(c, SPATIAL_POINTS - 1, rng, init_scale=scale)
        self.ego_sigma_head = Linear(c, t * 2, rng, init_scale=scale)

        if cfg.joint_enabled:
            m = cfg.modes
            self.ego_modes = Parameter(rng.normal(0.0, 1.0, size=(m, c)))
            self.agent_modes = Parameter(rng.normal(0.0, 1.0, size=(m, c)))
            self.entity_blocks = [block() for _ in range(cfg.refinement_rounds)]
            self.mode_blocks = [block() for _ in range(cfg.refinement_rounds)]
            self.joint_ego_head = Linear(c, t * 2, rng, init_scale=scale)
            self.joint_sigma_head = Linear(c, t * 2, rng, init_scale=scale)
            self.joint_ego_logit = Linear(c, 1, rng, init_scale=scale)
            self.joint_agent_head = Linear(c, t * 2, rng, init_scale=scale)
            self.joint_agent_logit = Linear(c, 1, rng, init_scale=scale)

    # -- encoder -----------------------------------------------------------

    def encode(self, features: FeatureSet) -> MarginalEmbeddings:
        c = self.config.embed_dim
        n = features.n_agents
        entities = self.entity_encoder(Tensor(features.entities))
        entities = F.concat([entities[0:1] + self.ego_type, entities[1:]], axis=0)
        map_token = self.map_encoder(Tensor(features.map)).reshape(1, c)
        tokens = F.concat([entities, map_token], axis=0)
        for blk in self.encoder_blocks:
            tokens = blk(tokens)
        return MarginalEmbeddings(ego=tokens[0], agents=tokens[1 : n + 1])

    # -- marginal heads ----------------------------------------------------

    def marginal_heads(
        self, emb: MarginalEmbeddings, features: FeatureSet
    ) -> tuple[MarginalPredictionSet, EgoPlan]:
        n = emb.agents.shape[0]
        k, t = self.config.marginal_modes, FUTURE_STEPS
        anchors = features.anchors
        offsets = self.agent_traj_head(emb.agents).reshape(n, k, t, 2)
        trajectories = offsets + anchors[1:, None, :, :]
        logits = self.agent_logit_head(emb.agents)

        temporal = self.ego_temporal_head(emb.ego).reshape(t, 2) + anchors[0]
        ego_pose = features.current[0]
        headings = F.cumsum(self.ego_spatial_head(emb.ego)) + ego_pose[2]
        steps = F.stack([F.cos(headings), F.sin(headings)], axis=-1) * SPATIAL_SPACING
        origin = ego_pose[None, :2]
        spatial = F.concat([origin, F.cumsum(steps, axis=0) + origin], axis=0)
        sigma = bounded_sigma(self.ego_sigma_head(emb.ego).reshape(t, 2))
        plan = EgoPlan(temporal=temporal, spatial=spatial, sigma=sigma)
        return MarginalPredictionSet(trajectories=trajectories, logits=logits), plan

    # -- joint refinement --------------------------------------------------

    def initial_stacks(self, emb: MarginalEmbeddings) -> ModeStack:
        c, m = self.config.embed_dim, self.config.modes
        n = emb.agents.shape[0]
        decoded = F.concat([emb.ego.reshape(1, c), emb.agents], axis=0).reshape(1 + n, 1, c)
        ego_modes = self.ego_modes.reshape(1, m, c)
        agent_modes = self.agent_modes.reshape(1, m, c) * np.ones((n, 1, 1))
        modes = F.concat([ego_modes, agent_modes], axis=0)
        return ModeStack(F.concat([decoded, modes], axis=1))

    def agent_mode_attention(self, stack: ModeStack, block: SelfAttentionBlock) -> ModeStack:
        """Attention along the mode axis, independently for every entity stack."""
        return ModeStack(block(stack.tokens))

    def entity_attention(self, stack: ModeStack, block: SelfAttentionBlock) -> ModeStack:
        """Attention across entities, independently for every slot."""
        by_slot = F.transpose(stack.tokens, (1, 0, 2))
        return ModeStack(F.transpose(block(by_slot), (1, 0, 2)))

    def refine(self, stack: ModeStack) -> ModeStack:
        for entity_block, mode_block in zip(self.entity_blocks, self.mode_blocks, strict=True):
            stack = self.entity_attention(stack, entity_block)
            stack = self.agent_mode_attention(stack, mode_block)
        return stack

    def joint_heads(self, stack: ModeStack, features: FeatureSet) -> JointPrediction:
        m, t = stack.modes, FUTURE_STEPS
        ego_tokens = stack.tokens[0, 1:]
        agent_tokens = stack.tokens[1:, 1:]
        n = agent_tokens.shape[0]
        anchors = features.anchors
        return JointPrediction(
            ego_mu=self.joint_ego_head(ego_tokens).reshape(m, t, 2) + anchors[0],
            ego_sigma=bounded_sigma(self.joint_sigma_head(ego_tokens).reshape(m, t, 2)),
            ego_logits=self.joint_ego_logit(ego_tokens).reshape(m),
            agent_trajectories=self.joint_agent_head(agent_tokens).reshape(n, m, t, 2)
            + anchors[1:, None, :, :],
            agent_logits=self.joint_agent_logit(agent_tokens).reshape(n, m),
        )

    # -- full pass ---------------------------------------------------------

    def __call__(self, features: FeatureSet) -> ModelOutput:
        emb = self.encode(features)
        joint = None
        if self.config.joint_enabled:
            stack = self.refine(self.initial_stacks(emb))
            decoded = stack.decoded()
            emb = MarginalEmbeddings(ego=decoded[0], agents=decoded[1:])
            joint = self.joint_heads(stack, features)
        marginal, plan = self.marginal_heads(emb, features)
        return ModelOutput(
            embeddings=emb, marginal=marginal, ego_plan=plan, joint=joint, features=features
        )

    def predict(self, scene: Scene) -> ModelOutput:
        return self(scene_features(scene))


def agent_joint_head_parameter(name: str) -> bool:
    return name.startswith(AGENT_JOINT_HEAD_PREFIXES)
