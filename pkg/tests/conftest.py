"""Root conftest for tests."""

import os

import pytest
import structlog

from app.scene.generator import generate_scene
from app.schemas.v1.common import ScenarioTag
from tests.helpers import straight_scene, three_agent_scene

os.environ.setdefault("CAAD_LOG_LEVEL", "WARNING")


def pytest_collection_modifyitems(items: list[pytest.Item]) -> None:
    """Auto-apply markers based on test directory structure."""
    dir_marker_map = {
        "unit": pytest.mark.unit,
        "integration": pytest.mark.integration,
        "acceptance": pytest.mark.acceptance,
    }
    for item in items:
        test_path = str(item.fspath)
        for dir_name, marker in dir_marker_map.items():
            if f"/{dir_name}/" in test_path or f"\\{dir_name}\\" in test_path:
                item.add_marker(marker)
                break


@pytest.fixture(autouse=True)
def _reset_structlog():
    """Drop logging configuration bound to this test's captured streams."""
    yield
    structlog.reset_defaults()
    structlog.contextvars.clear_contextvars()


@pytest.fixture
def empty_scene():
    return straight_scene()


@pytest.fixture
def fixture_scene():
    """Ego plus three constant-velocity agents on a straight road."""
    return three_agent_scene()


@pytest.fixture(scope="session")
def generated_scenes():
    """Two generated scenes per scenario tag."""
    return [generate_scene(seed, tag) for tag in ScenarioTag for seed in (1, 2)]


@pytest.fixture
def tiny_model_config():
    from app.model.config import ModelConfig

    return ModelConfig(
        embed_dim=8,
        heads=2,
        ff_mult=2,
        modes=3,
        marginal_modes=2,
        encoder_rounds=1,
        refinement_rounds=2,
        seed=7,
    )
