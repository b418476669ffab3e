"""Soft actor-critic training of the multi-view teacher from a demo-seeded replay buffer."""

import logging
import math
import time
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from viewdistill.config import get_settings
from viewdistill.core.augment import augment_batch
from viewdistill.core.exceptions import FingerprintError, TrainingDivergedError
from viewdistill.db.metrics import MetricsWriter
from viewdistill.db.replay import Batch, ReplayBuffer, Transition
from viewdistill.models.archive import ParameterSet, save_params
from viewdistill.models.encoder import batch_to_tensor
from viewdistill.models.policy import Agent
from viewdistill.schemas.camera import CameraRig
from viewdistill.schemas.metrics import MetricsRecord, Stage, ViewMode
from viewdistill.schemas.run import RunConfig
from viewdistill.schemas.training import AugmentConfig, SACConfig
from viewdistill.services.liftsim import LiftEnv
from viewdistill.services.rollout import AgentPolicy, EpisodeTracker, observe

logger = logging.getLogger(__name__)

RigForEpisode = Callable[[int, np.random.Generator], CameraRig]
CHECKPOINT_NAME = "checkpoint.pt"
LAST_GOOD_NAME = "last_good.vdp"


class TensorBatch(NamedTuple):
    obs: torch.Tensor  # (B, 3V, H, W) in [0, 1]
    q: torch.Tensor | None
    action: torch.Tensor
    reward: torch.Tensor
    next_obs: torch.Tensor
    next_q: torch.Tensor | None
    done: torch.Tensor


def to_tensors(
    batch: Batch,
    augment: AugmentConfig | None = None,
    rng: np.random.Generator | None = None,
) -> TensorBatch:
    """Convert a sampled batch; with `augment`, obs and next obs get independent draws."""
    obs = batch.obs.astype(np.float32) / 255.0
    next_obs = batch.next_obs.astype(np.float32) / 255.0
    if augment is not None and augment.enabled and rng is not None:
        obs = augment_batch(obs, augment, rng)
        next_obs = augment_batch(next_obs, augment, rng)

    def optional(x: np.ndarray | None) -> torch.Tensor | None:
        return None if x is None else torch.as_tensor(x, dtype=torch.float32)

    return TensorBatch(
        obs=batch_to_tensor(obs),
        q=optional(batch.q),
        action=torch.as_tensor(batch.action, dtype=torch.float32),
        reward=torch.as_tensor(batch.reward, dtype=torch.float32),
        next_obs=batch_to_tensor(next_obs),
        next_q=optional(batch.next_q),
        done=torch.as_tensor(batch.done, dtype=torch.float32),
    )


def critic_loss(
    agent: Agent,
    batch: TensorBatch,
    gamma: float,
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Soft Bellman residual of both critics against the min-of-twin target."""
    with torch.no_grad():
        next_h = agent.head_input(agent.encoder(batch.next_obs), batch.next_q)
        next_sample = agent.actor.sample(next_h, generator)
        target_h = agent.head_input(agent.encoder_target(batch.next_obs), batch.next_q)
        tq1, tq2 = agent.critic_target(target_h, next_sample.action)
        soft_value = torch.min(tq1, tq2) - agent.alpha.detach() * next_sample.log_prob
        target = batch.reward + gamma * (1.0 - batch.done) * soft_value

    h = agent.head_input(agent.encoder(batch.obs), batch.q)
    q1, q2 = agent.critic(h, batch.action)
    loss = F.mse_loss(q1, target) + F.mse_loss(q2, target)
    return loss, {"critic_loss": loss.item(), "q_mean": q1.mean().item()}


def actor_loss(
    agent: Agent,
    batch: TensorBatch,
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Returns the loss and the (detached) log-probs of the reparameterized actions.

    The encoder output is detached, so the encoder learns from the critic loss only.
    """
    h = agent.head_input(agent.encoder(batch.obs).detach(), batch.q)
    sample = agent.actor.sample(h, generator)
    q1, q2 = agent.critic(h, sample.action)
    loss = (agent.alpha.detach() * sample.log_prob - torch.min(q1, q2)).mean()
    return loss, sample.log_prob.detach()


def temperature_loss(
    log_alpha: torch.Tensor, log_probs: torch.Tensor, target_entropy: float
) -> torch.Tensor:
    return (-log_alpha.exp() * (log_probs.detach() + target_entropy)).mean()


def soft_update(target: nn.Module, online: nn.Module, tau: float) -> None:
    """target <- (1 - tau) * target + tau * online, parameter by parameter."""
    target_state = target.state_dict()
    online_state = online.state_dict()
    layout = [(k, tuple(v.shape)) for k, v in target_state.items()]
    if layout != [(k, tuple(v.shape)) for k, v in online_state.items()]:
        raise FingerprintError("soft_update between modules of different architectures")
    with torch.no_grad():
        for key, t in target_state.items():
            if t.is_floating_point():
                t.mul_(1.0 - tau).add_(online_state[key], alpha=tau)


class TrainResult(NamedTuple):
    agent: Agent
    params: ParameterSet
    records: list[MetricsRecord]
    wall_time: float


class SACTrainer:
    """Owns one agent, its optimizers, the replay buffer and every random stream."""

    def __init__(self, agent: Agent, config: SACConfig, buffer: ReplayBuffer, seed: int):
        self.agent = agent
        self.config = config
        self.buffer = buffer
        self.critic_opt = torch.optim.Adam(
            [*agent.encoder.parameters(), *agent.critic.parameters()], lr=config.critic_lr
        )
        self.actor_opt = torch.optim.Adam(agent.actor.parameters(), lr=config.actor_lr)
        self.alpha_opt = torch.optim.Adam([agent.log_alpha], lr=config.alpha_lr)
        self.rng = np.random.default_rng(seed)
        self.generator = torch.Generator().manual_seed(seed)
        self.episode = 0
        self.env_steps = 0
        self.updates = 0

    def update(self, augment: AugmentConfig) -> dict[str, float]:
        cfg = self.config
        batch = self.buffer.sample(cfg.batch_size, self.rng)
        tensors = to_tensors(batch, augment, self.rng)

        loss_q, info = critic_loss(self.agent, tensors, cfg.gamma, self.generator)
        self.critic_opt.zero_grad()
        loss_q.backward()
        self.critic_opt.step()

        loss_pi, log_probs = actor_loss(self.agent, tensors, self.generator)
        self.actor_opt.zero_grad()
        loss_pi.backward()
        self.actor_opt.step()

        loss_alpha = temperature_loss(self.agent.log_alpha, log_probs, cfg.target_entropy)
        self.alpha_opt.zero_grad()
        loss_alpha.backward()
        self.alpha_opt.step()

        soft_update(self.agent.critic_target, self.agent.critic, cfg.tau)
        soft_update(self.agent.encoder_target, self.agent.encoder, cfg.tau)
        self.updates += 1
        info.update(
            actor_loss=loss_pi.item(),
            alpha_loss=loss_alpha.item(),
            alpha=self.agent.alpha.item(),
            demo_fraction=batch.demo_fraction,
        )
        return info

    def state_dict(self) -> dict:
        return {
            "agent": self.agent.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "actor_opt": self.actor_opt.state_dict(),
            "alpha_opt": self.alpha_opt.state_dict(),
            "buffer": self.buffer.state_dict(),
            "rng": self.rng.bit_generator.state,
            "generator": self.generator.get_state(),
            "episode": self.episode,
            "env_steps": self.env_steps,
            "updates": self.updates,
        }

    def load_state_dict(self, state: dict) -> None:
        self.agent.load_state_dict(state["agent"])
        self.critic_opt.load_state_dict(state["critic_opt"])
        self.actor_opt.load_state_dict(state["actor_opt"])
        self.alpha_opt.load_state_dict(state["alpha_opt"])
        self.buffer.load_state_dict(state["buffer"])
        self.rng.bit_generator.state = state["rng"]
        self.generator.set_state(state["generator"])
        self.episode = state["episode"]
        self.env_steps = state["env_steps"]
        self.updates = state["updates"]

    def save_checkpoint(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / CHECKPOINT_NAME
        tmp = path.with_suffix(".tmp")
        torch.save(self.state_dict(), tmp)
        tmp.replace(path)
        save_params(self.agent.parameter_set(kind="last_good"), directory / LAST_GOOD_NAME)
        return path

    def load_checkpoint(self, directory: Path) -> bool:
        path = directory / CHECKPOINT_NAME
        if not path.exists():
            return False
        self.load_state_dict(torch.load(path, weights_only=False))
        return True


def _check_finite(info: dict[str, float], checkpoint_dir: Path | None, updates: int) -> None:
    bad = {k: v for k, v in info.items() if not math.isfinite(v)}
    if bad:
        last_good = checkpoint_dir / LAST_GOOD_NAME if checkpoint_dir else None
        if last_good is not None and not last_good.exists():
            last_good = None
        raise TrainingDivergedError(f"non-finite losses after {updates} updates: {bad}", last_good)


def train_teacher(
    config: RunConfig,
    seed: int,
    demos: ReplayBuffer,
    views: int | None = None,
    rig_for_episode: RigForEpisode | None = None,
    stage: Stage = "teacher",
    policy: str | None = None,
    total_steps: int | None = None,
    checkpoint_dir: Path | None = None,
    writer: MetricsWriter | None = None,
    resume: bool = False,
) -> TrainResult:
    """Alternate stochastic rollouts with SAC updates until `total_steps` environment steps.

    The teacher's cameras are fixed for the whole run unless `rig_for_episode` supplies a rig
    per episode (the randomized-camera control). Acting uses raw renders; updates use
    augmented batches.
    """
    settings = get_settings()
    views = views or config.teacher_views
    spec = config.teacher_spec(views)
    policy = policy or f"t{views}cam"
    total_steps = total_steps or config.teacher_steps
    torch.manual_seed(seed)
    agent = Agent.build(spec, config.sac.init_temperature)
    buffer = ReplayBuffer(
        config.sac.buffer_capacity,
        views,
        spec.encoder.image_size,
        spec.joint_dim,
        config.env.success_reward_per_step,
    )
    buffer.extend(demos)
    trainer = SACTrainer(agent, config.sac, buffer, seed)
    view_mode: ViewMode = "random" if rig_for_episode is not None else "fixed"
    fixed = config.cameras.rig(views)
    rig_for_episode = rig_for_episode or (lambda episode, rng: fixed)
    config_hash = config.config_hash()

    if resume and checkpoint_dir is not None and trainer.load_checkpoint(checkpoint_dir):
        logger.warning(f"Resuming {policy} seed {seed} from episode {trainer.episode}")
        if writer is not None:
            resumed_at = trainer.episode
            writer.truncate(
                lambda r: not (r.stage == stage and r.seed == seed and r.episode >= resumed_at)
            )

    env = LiftEnv(config.env, config.task)
    actor = AgentPolicy(agent, deterministic=False, generator=trainer.generator)
    records: list[MetricsRecord] = []
    started = time.perf_counter()

    while trainer.env_steps < total_steps:
        rig = rig_for_episode(trainer.episode, trainer.rng)
        state = env.reset(trainer.rng)
        obs = observe(state, rig, config.env, spec.encoder.image_size, config.with_state)
        tracker = EpisodeTracker()
        done = False
        while not done:
            action = actor.act(obs, state)
            state, reward, done = env.step(action)
            next_obs = observe(state, rig, config.env, spec.encoder.image_size, config.with_state)
            buffer.push(
                Transition(
                    obs.images, obs.q, action.to_array(), reward, done, next_obs.images, next_obs.q
                )
            )
            tracker.record(reward)
            obs = next_obs
            trainer.env_steps += 1
            for _ in range(config.sac.updates_per_step):
                info = trainer.update(config.augment)
                _check_finite(info, checkpoint_dir, trainer.updates)

        cam = rig.third_person[0] if rig.third_person else config.cameras.front
        record = MetricsRecord(
            config_hash=config_hash,
            stage=stage,
            policy=policy,
            task=config.task,
            seed=seed,
            episode=trainer.episode,
            view_mode=view_mode,
            **MetricsRecord.camera_fields(cam),
            episode_return=tracker.episode_return,
            success=tracker.success,
            first_success_step=tracker.first_success_step,
            steps=tracker.steps,
            wall_time=time.perf_counter() - started,
        )
        records.append(record)
        if writer is not None:
            writer.append(record)
        trainer.episode += 1
        if trainer.episode % settings.log_every_episodes == 0:
            logger.info(
                f"{policy} seed {seed} episode {trainer.episode}: "
                f"return={tracker.episode_return:.0f} steps={trainer.env_steps}/{total_steps} "
                f"alpha={agent.alpha.item():.4f}"
            )
        every = config.sac.checkpoint_every_episodes
        if checkpoint_dir is not None and trainer.episode % every == 0:
            trainer.save_checkpoint(checkpoint_dir)

    wall_time = time.perf_counter() - started
    logger.info(f"Finished {policy} seed {seed}: {trainer.episode} episodes in {wall_time:.0f}s")
    params = agent.parameter_set(policy=policy, seed=str(seed), config_hash=config_hash)
    return TrainResult(agent, params, records, wall_time)
