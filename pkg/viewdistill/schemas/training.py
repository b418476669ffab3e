"""Training schemas - augmentation, network architecture, SAC and distillation settings."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from viewdistill.core.hashing import hash_document
from viewdistill.schemas.camera import CurriculumSchedule, Interval
from viewdistill.schemas.task import ACTION_DIM, JOINT_DIM, TaskKind

FeatureLossKind = Literal["mse", "pairwise_similarity", "none"]


class AugmentConfig(BaseModel):
    """Pixel shift and color jitter applied to every training batch."""

    model_config = ConfigDict(frozen=True)

    enabled: bool = True
    max_shift: int = Field(default=4, ge=0)
    brightness_range: Interval = (0.7, 1.3)
    contrast_range: Interval = (0.7, 1.3)
    saturation_range: Interval = (0.7, 1.3)

    @field_validator("brightness_range", "contrast_range", "saturation_range")
    @classmethod
    def check_factor_range(cls, v: Interval) -> Interval:
        if v[0] <= 0.0 or v[0] > v[1]:
            raise ValueError(f"factor range must be positive with min <= max, got {v}")
        return v


class NetworkConfig(BaseModel):
    """Width settings shared by teacher and student networks."""

    model_config = ConfigDict(frozen=True)

    conv_channels: int = Field(default=32, gt=0)
    attention_dim: int = Field(default=16, gt=0)
    positional_encoding: bool = True
    feature_dim: int = Field(default=64, gt=0)
    hidden_dim: int = Field(default=256, gt=0)


class EncoderSpec(BaseModel):
    """Convolutional encoder: 12 3x3 conv layers, one self-attention layer, projection to z."""

    model_config = ConfigDict(frozen=True)

    views: int = Field(ge=1, le=3)
    image_size: int = Field(default=84, gt=0)
    conv_channels: int = 32
    kernel_size: int = 3
    strides: tuple[int, ...] = (2, 1, 1, 2, 1, 1, 2, 1, 1, 1, 1, 1)
    attention_dim: int = 16
    positional_encoding: bool = True
    feature_dim: int = 64
    activation: Literal["silu"] = "silu"

    @property
    def in_channels(self) -> int:
        return 3 * self.views

    @property
    def grid_size(self) -> int:
        size = self.image_size
        pad = self.kernel_size // 2
        for stride in self.strides:
            size = (size + 2 * pad - self.kernel_size) // stride + 1
        return size


class PolicySpec(BaseModel):
    """Everything that fixes the parameter layout of an agent; hashed into its fingerprint."""

    model_config = ConfigDict(frozen=True)

    encoder: EncoderSpec
    action_dim: int = ACTION_DIM
    joint_dim: int = Field(default=0, ge=0)
    hidden_dim: int = 256
    log_std_min: float = -10.0
    log_std_max: float = 2.0

    @classmethod
    def build(
        cls,
        network: NetworkConfig,
        views: int,
        with_state: bool = False,
        image_size: int = 84,
    ) -> "PolicySpec":
        encoder = EncoderSpec(
            views=views,
            image_size=image_size,
            conv_channels=network.conv_channels,
            attention_dim=network.attention_dim,
            positional_encoding=network.positional_encoding,
            feature_dim=network.feature_dim,
        )
        return cls(
            encoder=encoder,
            joint_dim=JOINT_DIM if with_state else 0,
            hidden_dim=network.hidden_dim,
        )

    def fingerprint(self) -> str:
        return hash_document(self.model_dump(mode="json"))


class SACConfig(BaseModel):
    """Soft actor-critic hyperparameters for teacher training."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(default=0.99, gt=0.0, le=1.0)
    tau: float = Field(default=0.005, gt=0.0, le=1.0)
    batch_size: int = Field(default=128, gt=0)
    actor_lr: float = Field(default=3e-4, gt=0.0)
    critic_lr: float = Field(default=3e-4, gt=0.0)
    alpha_lr: float = Field(default=3e-4, gt=0.0)
    init_temperature: float = Field(default=0.1, gt=0.0)
    target_entropy: float = -float(ACTION_DIM)
    updates_per_step: int = Field(default=1, ge=1)
    buffer_capacity: int = Field(default=50_000, gt=0)
    train_steps: dict[TaskKind, int] = {"cube": 150_000, "mug": 250_000}
    checkpoint_every_episodes: int = Field(default=50, ge=1)


class DistillConfig(BaseModel):
    """Student distillation: loss mix, optimizer, budget and camera curriculum."""

    model_config = ConfigDict(frozen=True)

    feature_loss: FeatureLossKind = "mse"
    action_weight: float = Field(default=1.0, ge=0.0)
    feature_weight: float = Field(default=1.0, ge=0.0)
    batch_size: int = Field(default=128, gt=0)
    learning_rate: float = Field(default=3e-4, gt=0.0)
    distill_steps: int = Field(default=60_000, gt=0)
    seed_episodes: int = Field(default=20, ge=0)
    buffer_capacity: int = Field(default=50_000, gt=0)
    student_resolution: int = Field(default=84, gt=0)
    curriculum: CurriculumSchedule = CurriculumSchedule()
    checkpoint_every_episodes: int = Field(default=50, ge=1)
