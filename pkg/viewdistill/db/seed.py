"""Seed the replay buffer with scripted-expert demonstrations."""

import logging
import time
from typing import Callable, NamedTuple

import numpy as np

from viewdistill.core.exceptions import ViewDistillError
from viewdistill.db.replay import ReplayBuffer, Transition
from viewdistill.schemas.camera import CameraRig
from viewdistill.schemas.metrics import MetricsRecord, ViewMode
from viewdistill.schemas.run import RunConfig
from viewdistill.schemas.task import JOINT_DIM
from viewdistill.services.liftsim import LiftEnv, scripted_expert
from viewdistill.services.rollout import EpisodeTracker, observe

logger = logging.getLogger(__name__)

RigForEpisode = Callable[[int, np.random.Generator], CameraRig]


class DemoResult(NamedTuple):
    buffer: ReplayBuffer
    records: list[MetricsRecord]
    rerolls: int


def fixed_rig(rig: CameraRig) -> RigForEpisode:
    return lambda episode, rng: rig


def run_expert_episode(
    config: RunConfig, rig: CameraRig, episode_seed: int
) -> tuple[list[Transition], EpisodeTracker]:
    """One noisy expert episode rendered through `rig`."""
    rng = np.random.default_rng(episode_seed)
    env = LiftEnv(config.env, config.task)
    state = env.reset(rng)
    obs = observe(state, rig, config.env, with_state=config.with_state)
    tracker = EpisodeTracker()
    transitions: list[Transition] = []
    done = False
    while not done:
        action = scripted_expert(state, config.env, rng, config.demos.noise_std)
        state, reward, done = env.step(action)
        next_obs = observe(state, rig, config.env, with_state=config.with_state)
        transitions.append(
            Transition(
                images=obs.images,
                q=obs.q,
                action=action.to_array(),
                reward=reward,
                done=done,
                next_images=next_obs.images,
                next_q=next_obs.q,
            )
        )
        tracker.record(reward)
        obs = next_obs
    return transitions, tracker


def generate_demos(
    config: RunConfig,
    seed: int,
    rig_for_episode: RigForEpisode | None = None,
    views: int | None = None,
    policy: str = "expert",
    view_mode: ViewMode = "fixed",
) -> DemoResult:
    """Collect `config.demos.episodes` successful expert episodes.

    Failed episodes are re-rolled with a fresh episode seed; exceeding `max_rerolls` aborts.
    """
    views = views or config.teacher_views
    rig_for_episode = rig_for_episode or fixed_rig(config.cameras.rig(views))
    joint_dim = JOINT_DIM if config.with_state else 0
    capacity = config.demos.episodes * config.env.episode_length
    buffer = ReplayBuffer(
        capacity, views, joint_dim=joint_dim, success_reward=config.env.success_reward_per_step
    )
    seeds = np.random.default_rng(seed)
    config_hash = config.config_hash()
    records: list[MetricsRecord] = []
    rerolls = 0
    started = time.perf_counter()

    for episode in range(config.demos.episodes):
        while True:
            rig = rig_for_episode(episode, seeds)
            episode_seed = int(seeds.integers(0, 2**31 - 1))
            transitions, tracker = run_expert_episode(config, rig, episode_seed)
            if tracker.success:
                break
            rerolls += 1
            if rerolls > config.demos.max_rerolls:
                raise ViewDistillError(
                    f"scripted expert failed {rerolls} times; check the task configuration"
                )
        for t in transitions:
            buffer.push(t, is_demo=True)
        cam = rig.third_person[0] if rig.third_person else config.cameras.front
        records.append(
            MetricsRecord(
                config_hash=config_hash,
                stage="demo",
                policy=policy,
                task=config.task,
                seed=seed,
                episode=episode,
                view_mode=view_mode,
                **MetricsRecord.camera_fields(cam),
                episode_return=tracker.episode_return,
                success=tracker.success,
                first_success_step=tracker.first_success_step,
                steps=tracker.steps,
                wall_time=time.perf_counter() - started,
            )
        )

    if rerolls:
        logger.warning(f"Re-rolled {rerolls} failed expert episodes (seed {seed})")
    logger.info(f"Collected {len(buffer)} demo transitions from {config.demos.episodes} episodes")
    return DemoResult(buffer, records, rerolls)
