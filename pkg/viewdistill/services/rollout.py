"""Observations, per-episode bookkeeping and the policies that act in rollouts."""

from typing import NamedTuple, Protocol

import numpy as np
import torch

from viewdistill.core.rasterizer import render_rig, to_uint8
from viewdistill.models.policy import Agent, actor_sample, encode
from viewdistill.schemas.camera import CameraRig
from viewdistill.schemas.task import ACTION_DIM, Action, SceneState, TaskConfig
from viewdistill.services.liftsim import scripted_expert


class Observation(NamedTuple):
    images: list[np.ndarray]  # uint8 (H, W, 3), rig order
    q: np.ndarray | None


class Policy(Protocol):
    def act(self, obs: Observation, state: SceneState) -> Action: ...


def observe(
    state: SceneState,
    rig: CameraRig,
    config: TaskConfig,
    size: int = 84,
    with_state: bool = False,
) -> Observation:
    images = [to_uint8(img) for img in render_rig(state, rig, config, size)]
    q = np.asarray(state.q, dtype=np.float32) if with_state else None
    return Observation(images, q)


class EpisodeTracker:
    """Return, success and first-success step of one episode."""

    def __init__(self) -> None:
        self.episode_return = 0.0
        self.first_success_step = -1
        self.steps = 0

    def record(self, reward: float) -> None:
        if reward > 0.0 and self.first_success_step < 0:
            self.first_success_step = self.steps
        self.episode_return += reward
        self.steps += 1

    @property
    def success(self) -> int:
        return int(self.first_success_step >= 0)


class AgentPolicy:
    """Acts with a trained agent: squashed mean when `deterministic`, else a sample."""

    def __init__(
        self,
        agent: Agent,
        deterministic: bool = True,
        generator: torch.Generator | None = None,
    ):
        self.agent = agent
        self.deterministic = deterministic
        self.generator = generator

    def act(self, obs: Observation, state: SceneState) -> Action:
        with torch.no_grad():
            _, h = encode(self.agent, obs.images, obs.q)
            if self.deterministic:
                action = self.agent.actor.deterministic(h.unsqueeze(0)).squeeze(0)
            else:
                action, _ = actor_sample(self.agent, h, self.generator)
        return Action.from_array(action.numpy())


class ExpertPolicy:
    """Scripted expert wrapped as a policy (reads the true state, ignores images)."""

    needs_images = False

    def __init__(self, config: TaskConfig):
        self.config = config

    def act(self, obs: Observation, state: SceneState) -> Action:
        return scripted_expert(state, self.config)


class RandomPolicy:
    needs_images = False

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def act(self, obs: Observation, state: SceneState) -> Action:
        return Action.from_array(self.rng.uniform(-1.0, 1.0, size=ACTION_DIM))
