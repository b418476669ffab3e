"""Distillation of a frozen multi-view teacher into a single-view student.

The student is trained on a growing paired buffer: the first episodes are driven by the teacher,
later ones by the student itself, and every episode views the scene through a freshly sampled
camera from the current curriculum range.
"""

import logging
import math
import time
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np
import torch

from viewdistill.config import get_settings
from viewdistill.core.augment import AugmentDraw, apply_draw, sample_draw
from viewdistill.core.camgeo import curriculum_range, sample_camera
from viewdistill.core.exceptions import (
    DegenerateFeatureError,
    FingerprintError,
    ShapeError,
    TrainingDivergedError,
)
from viewdistill.db.metrics import MetricsWriter
from viewdistill.models.archive import ParameterSet, save_params
from viewdistill.models.encoder import batch_to_tensor
from viewdistill.models.policy import Agent
from viewdistill.schemas.camera import CameraRig, CameraSpec
from viewdistill.schemas.metrics import MetricsRecord
from viewdistill.schemas.run import RunConfig
from viewdistill.schemas.task import JOINT_DIM, TaskConfig
from viewdistill.schemas.training import AugmentConfig, DistillConfig
from viewdistill.services.liftsim import LiftEnv
from viewdistill.services.rollout import AgentPolicy, EpisodeTracker, observe

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.pt"
LAST_GOOD_NAME = "last_good.vdp"
NORM_EPS = 1e-8

Actor = Literal["teacher", "student"]


def student_name(teacher_views: int, feature_loss: str) -> str:
    """Metrics name of a student, e.g. `s_t3cam` or `s_t3cam_pairwise_similarity`."""
    base = f"s_t{teacher_views}cam"
    return base if feature_loss == "mse" else f"{base}_{feature_loss}"


def kd_action_loss(student_actions: torch.Tensor, teacher_actions: torch.Tensor) -> torch.Tensor:
    """Mean over batch and action dimensions of the squared action difference."""
    if student_actions.shape != teacher_actions.shape:
        raise ShapeError(
            f"action batches differ: {tuple(student_actions.shape)} "
            f"vs {tuple(teacher_actions.shape)}"
        )
    return (student_actions - teacher_actions).pow(2).mean()


def cosine_similarity_matrix(features: torch.Tensor) -> torch.Tensor:
    """(b, z) -> (b, b) matrix of pairwise cosine similarities."""
    norms = features.norm(dim=1)
    if bool((norms <= NORM_EPS).any()):
        rows = torch.nonzero(norms <= NORM_EPS).flatten().tolist()
        raise DegenerateFeatureError(f"feature rows {rows} have zero norm")
    unit = features / norms.unsqueeze(1)
    return unit @ unit.T


def similarity_loss(teacher_features: torch.Tensor, student_features: torch.Tensor) -> torch.Tensor:
    """Squared Frobenius distance between teacher and student similarity matrices."""
    if teacher_features.shape[0] != student_features.shape[0]:
        raise ShapeError("teacher and student feature batches must have the same size")
    diff = cosine_similarity_matrix(teacher_features) - cosine_similarity_matrix(student_features)
    return diff.pow(2).sum()


def feature_mse_loss(
    teacher_features: torch.Tensor, student_features: torch.Tensor
) -> torch.Tensor:
    """Per-sample summed squared difference, averaged over the batch."""
    if teacher_features.shape != student_features.shape:
        raise ShapeError(
            f"feature batches differ: {tuple(teacher_features.shape)} "
            f"vs {tuple(student_features.shape)}"
        )
    return (teacher_features - student_features).pow(2).sum(dim=1).mean()


class LossParts(NamedTuple):
    total: torch.Tensor
    kd: torch.Tensor
    feature: torch.Tensor


def distillation_loss(
    student_actions: torch.Tensor,
    teacher_actions: torch.Tensor,
    student_features: torch.Tensor,
    teacher_features: torch.Tensor,
    config: DistillConfig,
) -> LossParts:
    kd = kd_action_loss(student_actions, teacher_actions)
    if config.feature_loss == "mse":
        feature = feature_mse_loss(teacher_features, student_features)
    elif config.feature_loss == "pairwise_similarity":
        feature = similarity_loss(teacher_features, student_features)
    else:
        feature = torch.zeros((), dtype=kd.dtype)
    total = config.action_weight * kd + config.feature_weight * feature
    return LossParts(total, kd, feature)


class PairedObservation(NamedTuple):
    """Teacher views and student view of one state, plus the step taken from it."""

    teacher_images: list[np.ndarray]
    teacher_q: np.ndarray | None
    student_image: np.ndarray
    student_q: np.ndarray | None
    action: np.ndarray
    reward: float
    done: bool
    state_id: int
    aug_id: int
    student_cam: CameraSpec


class PairedEpisode(NamedTuple):
    pairs: list[PairedObservation]
    tracker: EpisodeTracker
    student_cam: CameraSpec


def collect_paired_episode(
    env: LiftEnv,
    teacher_rig: CameraRig,
    student_cam: CameraSpec,
    acting_policy: AgentPolicy,
    acting: Actor,
    rng: np.random.Generator,
    student_size: int = 84,
    with_state: bool = False,
    episode_index: int = 0,
) -> PairedEpisode:
    """Roll out one episode, rendering teacher and student views from the same state."""
    config: TaskConfig = env.config
    student_rig = CameraRig(third_person=(student_cam,))
    state = env.reset(rng)
    tracker = EpisodeTracker()
    pairs: list[PairedObservation] = []
    done = False
    while not done:
        teacher_obs = observe(state, teacher_rig, config, 84, with_state)
        student_obs = observe(state, student_rig, config, student_size, with_state)
        acting_obs = teacher_obs if acting == "teacher" else student_obs
        action = acting_policy.act(acting_obs, state)
        state_id = episode_index * config.episode_length + state.step_index
        state, reward, done = env.step(action)
        tracker.record(reward)
        pairs.append(
            PairedObservation(
                teacher_images=teacher_obs.images,
                teacher_q=teacher_obs.q,
                student_image=student_obs.images[0],
                student_q=student_obs.q,
                action=action.to_array(),
                reward=reward,
                done=done,
                state_id=state_id,
                aug_id=int(rng.integers(0, 2**31 - 1)),
                student_cam=student_cam,
            )
        )
    return PairedEpisode(pairs, tracker, student_cam)


class PairedBuffer:
    """FIFO ring of paired observations."""

    def __init__(
        self,
        capacity: int,
        teacher_views: int,
        student_size: int = 84,
        joint_dim: int = 0,
        teacher_size: int = 84,
    ):
        self.capacity = capacity
        self.size = 0
        self.cursor = 0
        self.arrays = {
            "teacher": np.zeros(
                (capacity, teacher_views, teacher_size, teacher_size, 3), dtype=np.uint8
            ),
            "student": np.zeros((capacity, 1, student_size, student_size, 3), dtype=np.uint8),
            "teacher_q": np.zeros((capacity, joint_dim), dtype=np.float32),
            "student_q": np.zeros((capacity, joint_dim), dtype=np.float32),
            "aug_id": np.zeros(capacity, dtype=np.int64),
            "state_id": np.zeros(capacity, dtype=np.int64),
        }
        self.joint_dim = joint_dim

    def __len__(self) -> int:
        return self.size

    def push(self, pair: PairedObservation) -> None:
        i = self.cursor
        a = self.arrays
        a["teacher"][i] = np.stack(pair.teacher_images)
        a["student"][i, 0] = pair.student_image
        if self.joint_dim:
            a["teacher_q"][i] = pair.teacher_q
            a["student_q"][i] = pair.student_q
        a["aug_id"][i] = pair.aug_id
        a["state_id"][i] = pair.state_id
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        idx = rng.integers(0, self.size, size=batch_size)
        return {k: v[idx] for k, v in self.arrays.items()}

    def state_dict(self) -> dict:
        return {
            "size": self.size,
            "cursor": self.cursor,
            "arrays": {k: v[: self.size].copy() for k, v in self.arrays.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        for key, values in state["arrays"].items():
            self.arrays[key][: state["size"]] = values
        self.size = state["size"]
        self.cursor = state["cursor"]


def _scaled(draw: AugmentDraw, factor: float) -> AugmentDraw:
    return draw._replace(dx=round(draw.dx * factor), dy=round(draw.dy * factor))


def augment_pairs(
    sample: dict[str, np.ndarray], config: AugmentConfig, update_index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Float copies of teacher and student images, one shared draw per sample.

    The draw is a pure function of the sample's augmentation id and the update index, so a
    replayed update reproduces it exactly.
    """
    teacher = sample["teacher"].astype(np.float32) / 255.0
    student = sample["student"].astype(np.float32) / 255.0
    if not config.enabled:
        return teacher, student
    factor = student.shape[2] / teacher.shape[2]
    for i, aug_id in enumerate(sample["aug_id"]):
        draw = sample_draw(config, np.random.default_rng([int(aug_id), update_index]))
        for v in range(teacher.shape[1]):
            teacher[i, v] = apply_draw(teacher[i, v], draw)
        student[i, 0] = apply_draw(student[i, 0], _scaled(draw, factor))
    return teacher, student


class DistillResult(NamedTuple):
    student: Agent
    params: ParameterSet
    records: list[MetricsRecord]
    kd_trace: list[float]
    feature_trace: list[float]
    wall_time: float


class Distiller:
    """Owns the student, its optimizer, the paired buffer and the random streams."""

    def __init__(
        self,
        teacher: Agent,
        student: Agent,
        config: DistillConfig,
        augment: AugmentConfig,
        buffer: PairedBuffer,
        seed: int,
    ):
        self.teacher = teacher
        self.student = student
        self.config = config
        self.augment = augment
        self.buffer = buffer
        self.optimizer = torch.optim.Adam(
            [*student.encoder.parameters(), *student.actor.parameters()], lr=config.learning_rate
        )
        self.rng = np.random.default_rng(seed)
        self.episode = 0
        self.env_steps = 0
        self.updates = 0

    def update(self) -> LossParts:
        sample = self.buffer.sample(self.config.batch_size, self.rng)
        teacher_imgs, student_imgs = augment_pairs(sample, self.augment, self.updates)
        joint = self.buffer.joint_dim > 0
        teacher_q = torch.as_tensor(sample["teacher_q"]) if joint else None
        student_q = torch.as_tensor(sample["student_q"]) if joint else None

        with torch.no_grad():
            teacher_feat = self.teacher.encoder(batch_to_tensor(teacher_imgs))
            teacher_act = self.teacher.actor.deterministic(
                self.teacher.head_input(teacher_feat, teacher_q)
            )
        student_feat = self.student.encoder(batch_to_tensor(student_imgs))
        student_act = self.student.actor.deterministic(
            self.student.head_input(student_feat, student_q)
        )
        parts = distillation_loss(
            student_act, teacher_act, student_feat, teacher_feat, self.config
        )
        self.optimizer.zero_grad()
        parts.total.backward()
        self.optimizer.step()
        self.updates += 1
        return parts

    def state_dict(self) -> dict:
        return {
            "student": self.student.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "buffer": self.buffer.state_dict(),
            "rng": self.rng.bit_generator.state,
            "episode": self.episode,
            "env_steps": self.env_steps,
            "updates": self.updates,
        }

    def load_state_dict(self, state: dict) -> None:
        self.student.load_state_dict(state["student"])
        self.optimizer.load_state_dict(state["optimizer"])
        self.buffer.load_state_dict(state["buffer"])
        self.rng.bit_generator.state = state["rng"]
        self.episode = state["episode"]
        self.env_steps = state["env_steps"]
        self.updates = state["updates"]

    def save_checkpoint(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        tmp = directory / (CHECKPOINT_NAME + ".tmp")
        torch.save(self.state_dict(), tmp)
        tmp.replace(directory / CHECKPOINT_NAME)
        save_params(self.student.parameter_set(kind="last_good"), directory / LAST_GOOD_NAME)

    def load_checkpoint(self, directory: Path) -> bool:
        path = directory / CHECKPOINT_NAME
        if not path.exists():
            return False
        self.load_state_dict(torch.load(path, weights_only=False))
        return True


def check_compatible(teacher: Agent, student: Agent, config: DistillConfig) -> None:
    t_spec, s_spec = teacher.spec, student.spec
    if t_spec is None or s_spec is None:
        return
    if config.feature_loss == "mse" and t_spec.encoder.feature_dim != s_spec.encoder.feature_dim:
        raise FingerprintError(
            f"feature MSE needs equal feature sizes (teacher {t_spec.encoder.feature_dim}, "
            f"student {s_spec.encoder.feature_dim})"
        )
    if t_spec.joint_dim != s_spec.joint_dim or t_spec.action_dim != s_spec.action_dim:
        raise FingerprintError("teacher and student disagree on joint-state or action size")


def distill_student(
    config: RunConfig,
    seed: int,
    teacher: Agent,
    teacher_views: int | None = None,
    checkpoint_dir: Path | None = None,
    writer: MetricsWriter | None = None,
    resume: bool = False,
) -> DistillResult:
    """Distill `teacher` into a fresh single-view student. The teacher is never modified."""
    settings = get_settings()
    cfg = config.distill
    teacher_views = teacher_views or config.teacher_views
    policy = student_name(teacher_views, cfg.feature_loss)
    teacher.requires_grad_(False)
    teacher.eval()

    torch.manual_seed(seed)
    student = Agent.build(config.student_spec(), config.sac.init_temperature)
    check_compatible(teacher, student, cfg)
    joint_dim = JOINT_DIM if config.with_state else 0
    buffer = PairedBuffer(cfg.buffer_capacity, teacher_views, cfg.student_resolution, joint_dim)
    distiller = Distiller(teacher, student, cfg, config.augment, buffer, seed)
    config_hash = config.config_hash()

    if resume and checkpoint_dir is not None and distiller.load_checkpoint(checkpoint_dir):
        logger.warning(f"Resuming {policy} seed {seed} from episode {distiller.episode}")
        if writer is not None:
            resumed_at = distiller.episode
            writer.truncate(
                lambda r: not (r.stage == "distill" and r.seed == seed and r.episode >= resumed_at)
            )

    env = LiftEnv(config.env, config.task)
    teacher_rig = config.cameras.rig(teacher_views)
    teacher_policy = AgentPolicy(teacher, deterministic=True)
    student_policy = AgentPolicy(student, deterministic=True)
    records: list[MetricsRecord] = []
    kd_trace: list[float] = []
    feature_trace: list[float] = []
    started = time.perf_counter()

    while distiller.env_steps < cfg.distill_steps:
        camera_range = curriculum_range(cfg.curriculum, distiller.episode)
        student_cam = sample_camera(camera_range, distiller.rng)
        acting: Actor = "teacher" if distiller.episode < cfg.seed_episodes else "student"
        episode = collect_paired_episode(
            env,
            teacher_rig,
            student_cam,
            teacher_policy if acting == "teacher" else student_policy,
            acting,
            distiller.rng,
            cfg.student_resolution,
            config.with_state,
            distiller.episode,
        )
        for pair in episode.pairs:
            buffer.push(pair)
        distiller.env_steps += len(episode.pairs)

        kd_losses, feature_losses = [], []
        if len(buffer) >= cfg.batch_size:
            for _ in range(len(episode.pairs)):
                parts = distiller.update()
                kd, feat = parts.kd.item(), parts.feature.item()
                if not (math.isfinite(kd) and math.isfinite(feat)):
                    last_good = checkpoint_dir / LAST_GOOD_NAME if checkpoint_dir else None
                    if last_good is not None and not last_good.exists():
                        last_good = None
                    raise TrainingDivergedError(
                        f"non-finite distillation loss after {distiller.updates} updates "
                        f"(kd={kd}, feature={feat})",
                        last_good,
                    )
                kd_losses.append(kd)
                feature_losses.append(feat)
        kd_trace.extend(kd_losses)
        feature_trace.extend(feature_losses)

        tracker = episode.tracker
        record = MetricsRecord(
            config_hash=config_hash,
            stage="distill",
            policy=policy,
            task=config.task,
            seed=seed,
            episode=distiller.episode,
            view_mode="random",
            **MetricsRecord.camera_fields(student_cam),
            episode_return=tracker.episode_return,
            success=tracker.success,
            first_success_step=tracker.first_success_step,
            steps=tracker.steps,
            kd_loss=float(np.mean(kd_losses)) if kd_losses else None,
            feature_loss=float(np.mean(feature_losses)) if feature_losses else None,
            wall_time=time.perf_counter() - started,
        )
        records.append(record)
        if writer is not None:
            writer.append(record)
        distiller.episode += 1
        if distiller.episode % settings.log_every_episodes == 0:
            logger.info(
                f"{policy} seed {seed} episode {distiller.episode} ({acting} acting): "
                f"return={tracker.episode_return:.0f} kd={record.kd_loss} "
                f"steps={distiller.env_steps}/{cfg.distill_steps}"
            )
        if checkpoint_dir is not None and distiller.episode % cfg.checkpoint_every_episodes == 0:
            distiller.save_checkpoint(checkpoint_dir)

    wall_time = time.perf_counter() - started
    logger.info(f"Finished {policy} seed {seed}: {distiller.updates} updates in {wall_time:.0f}s")
    params = student.parameter_set(
        policy=policy, seed=str(seed), config_hash=config_hash, feature_loss=cfg.feature_loss
    )
    return DistillResult(student, params, records, kd_trace, feature_trace, wall_time)
