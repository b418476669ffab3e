"""Evaluation protocol: fixed front camera or a fresh random camera per trial."""

import logging
import time
from collections import defaultdict
from pathlib import Path

import numpy as np

from viewdistill.core.camgeo import sample_camera
from viewdistill.core.exceptions import EmptyInputError, ShapeError
from viewdistill.core.rasterizer import from_uint8, write_ppm
from viewdistill.schemas.camera import CameraRig
from viewdistill.schemas.metrics import EvalSummary, MetricsRecord, ViewMode
from viewdistill.schemas.run import RunConfig
from viewdistill.services.liftsim import LiftEnv
from viewdistill.services.rollout import EpisodeTracker, Observation, Policy, observe

logger = logging.getLogger(__name__)


def evaluate(
    policy: Policy,
    config: RunConfig,
    rig: CameraRig,
    view_mode: ViewMode,
    seed: int,
    policy_name: str,
    trials: int | None = None,
    image_size: int = 84,
    expected_views: int | None = None,
    dump_dir: Path | None = None,
    dump_frames: int = 0,
) -> list[MetricsRecord]:
    """Run `trials` episodes and return one record per trial.

    In random mode the front camera of `rig` is replaced per trial by a camera drawn from the
    widest curriculum range; the other views stay as configured. Cameras and episode resets draw
    from separate streams, so fixed and random runs with one seed see the same initial states.
    """
    trials = trials or config.evaluation.trials
    if expected_views is not None and rig.view_count != expected_views:
        raise ShapeError(
            f"policy expects {expected_views} views but the evaluation rig has {rig.view_count}"
        )
    reset_seq, camera_seq = np.random.SeedSequence(seed).spawn(2)
    reset_rng, camera_rng = np.random.default_rng(reset_seq), np.random.default_rng(camera_seq)
    env = LiftEnv(config.env, config.task)
    config_hash = config.config_hash()
    needs_images = getattr(policy, "needs_images", True)
    records: list[MetricsRecord] = []
    started = time.perf_counter()

    camera_range = config.distill.curriculum.max_range
    for trial in range(trials):
        trial_rig = rig
        if view_mode == "random":
            trial_rig = rig.with_front(sample_camera(camera_range, camera_rng))
        state = env.reset(reset_rng)
        tracker = EpisodeTracker()
        done = False
        while not done:
            if needs_images or (dump_dir is not None and trial == 0):
                obs = observe(state, trial_rig, config.env, image_size, config.with_state)
            else:
                obs = Observation([], None)
            if dump_dir is not None and trial == 0 and tracker.steps < dump_frames:
                _dump(obs, dump_dir, f"{policy_name}_{view_mode}_seed{seed}", tracker.steps)
            state, reward, done = env.step(policy.act(obs, state))
            tracker.record(reward)
        front = trial_rig.third_person[0] if trial_rig.third_person else config.cameras.front
        records.append(
            MetricsRecord(
                config_hash=config_hash,
                stage="eval",
                policy=policy_name,
                task=config.task,
                seed=seed,
                episode=trial,
                view_mode=view_mode,
                **MetricsRecord.camera_fields(front),
                episode_return=tracker.episode_return,
                success=tracker.success,
                first_success_step=tracker.first_success_step,
                steps=tracker.steps,
                wall_time=time.perf_counter() - started,
            )
        )

    rate = np.mean([r.success for r in records])
    logger.info(f"Evaluated {policy_name} ({view_mode}, seed {seed}): success={rate:.2%}")
    return records


def _dump(obs: Observation, directory: Path, prefix: str, step: int) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for view, image in enumerate(obs.images):
        write_ppm(directory / f"{prefix}_step{step:03d}_view{view}.ppm", from_uint8(image))


def summarize(records: list[MetricsRecord]) -> list[EvalSummary]:
    """Per (policy, task, view mode): mean and population std over seeds of per-seed rates."""
    if not records:
        raise EmptyInputError("no evaluation rows to summarize")
    groups: dict[tuple[str, str, str], dict[int, list[MetricsRecord]]] = defaultdict(
        lambda: defaultdict(list)
    )
    for r in records:
        if r.stage == "eval":
            groups[(r.policy, r.task, r.view_mode)][r.seed].append(r)
    if not groups:
        raise EmptyInputError("no evaluation rows to summarize")

    summaries = []
    for (policy, task, view_mode), by_seed in sorted(groups.items()):
        seeds = sorted(by_seed)
        success = np.array([np.mean([r.success for r in by_seed[s]]) for s in seeds])
        returns = np.array([np.mean([r.episode_return for r in by_seed[s]]) for s in seeds])
        summaries.append(
            EvalSummary(
                policy=policy,
                task=task,
                view_mode=view_mode,
                seeds=len(seeds),
                trials=sum(len(by_seed[s]) for s in seeds),
                success_mean=float(success.mean()),
                success_std=float(success.std()),
                return_mean=float(returns.mean()),
                return_std=float(returns.std()),
            )
        )
    return summaries
