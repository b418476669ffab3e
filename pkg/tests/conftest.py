"""Shared fixtures: task configs, seeded generators and tiny networks."""

from pathlib import Path

import numpy as np
import pytest
import torch

from viewdistill.config import get_settings
from viewdistill.models.policy import Agent
from viewdistill.schemas.run import RunConfig
from viewdistill.schemas.task import TaskConfig
from viewdistill.schemas.training import NetworkConfig, PolicySpec

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    monkeypatch.setenv("VIEWDISTILL_WORKERS", "1")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def task_config() -> TaskConfig:
    return TaskConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def tiny_network() -> NetworkConfig:
    return NetworkConfig(conv_channels=4, attention_dim=4, feature_dim=8, hidden_dim=16)


@pytest.fixture
def tiny_spec(tiny_network):
    def build(views: int = 1, with_state: bool = False, image_size: int = 84) -> PolicySpec:
        return PolicySpec.build(tiny_network, views, with_state, image_size)

    return build


@pytest.fixture
def tiny_agent(tiny_spec):
    def build(views: int = 1, with_state: bool = False, seed: int = 0, dtype=torch.float32):
        torch.manual_seed(seed)
        return Agent.build(tiny_spec(views, with_state)).to(dtype)

    return build


@pytest.fixture
def smoke_config(tmp_path) -> RunConfig:
    config = RunConfig.load(DATA_DIR / "smoke_run.json")
    return config.with_overrides(output_dir=tmp_path / "run")
