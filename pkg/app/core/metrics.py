"""Prometheus metrics for the CaAD training stack."""

from pathlib import Path

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile

# ---------------------------------------------------------------------------
# Policy alignment
# ---------------------------------------------------------------------------

caad_rollouts_scored_total = Counter(
    "caad_rollouts_scored_total",
    "Total sampled rollouts scored by the reward",
    ["scope"],  # scope: ego, agent
)

caad_rollouts_dropped_total = Counter(
    "caad_rollouts_dropped_total",
    "Rollouts dropped from a group because the reward rejected them",
    ["scope"],
)

caad_groups_skipped_total = Counter(
    "caad_groups_skipped_total",
    "Rollout groups skipped after shrinking below two members",
    ["scope"],
)

caad_reward_latency_seconds = Histogram(
    "caad_reward_latency_seconds",
    "Latency of scoring one rollout",
    buckets=[0.0005, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1],
)

# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

caad_train_epochs_total = Counter(
    "caad_train_epochs_total",
    "Completed training epochs",
    ["stage"],
)

caad_optimizer_steps_total = Counter(
    "caad_optimizer_steps_total",
    "Optimizer steps applied",
    ["stage"],
)

caad_train_epoch_seconds = Histogram(
    "caad_train_epoch_seconds",
    "Wall time of one training epoch",
    ["stage"],
    buckets=[1.0, 5.0, 15.0, 30.0, 60.0, 120.0, 300.0, 600.0],
)

# ---------------------------------------------------------------------------
# Closed-loop evaluation
# ---------------------------------------------------------------------------

caad_episodes_total = Counter(
    "caad_episodes_total",
    "Closed-loop episodes run",
    ["scenario_tag", "outcome"],  # outcome: success, collision, off_road, timeout
)


def export_textfile(path: Path) -> None:
    """Write the default registry in the node-exporter textfile format."""
    write_to_textfile(str(path), REGISTRY)
