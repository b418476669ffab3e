"""Run configuration schema - one JSON file per experiment."""

from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

from viewdistill.core.hashing import hash_document
from viewdistill.schemas.camera import CameraSetup, ViewCount
from viewdistill.schemas.task import TaskConfig, TaskKind
from viewdistill.schemas.training import (
    AugmentConfig,
    DistillConfig,
    FeatureLossKind,
    NetworkConfig,
    PolicySpec,
    SACConfig,
)


class DemoConfig(BaseModel):
    """Scripted-expert demonstrations that seed the teacher's replay buffer."""

    model_config = ConfigDict(frozen=True)

    episodes: int = Field(default=50, gt=0)
    noise_std: float = Field(default=0.05, ge=0.0)
    max_rerolls: int = Field(default=50, ge=0)


class EvalConfig(BaseModel):
    """Evaluation protocol settings."""

    model_config = ConfigDict(frozen=True)

    trials: int = Field(default=100, gt=0)
    dump_frames: int = Field(default=0, ge=0)
    smoothing_window: int = Field(default=10, ge=1)


class RunConfig(BaseModel):
    """Complete, hashable description of one experiment."""

    model_config = ConfigDict(frozen=True)

    name: str = "default"
    task: TaskKind = "cube"
    teacher_views: ViewCount = 3
    seeds: list[int] = [0, 1, 2]
    with_state: bool = False
    output_dir: Path = Path("runs/default")

    env: TaskConfig = TaskConfig()
    cameras: CameraSetup = CameraSetup()
    augment: AugmentConfig = AugmentConfig()
    network: NetworkConfig = NetworkConfig()
    sac: SACConfig = SACConfig()
    distill: DistillConfig = DistillConfig()
    demos: DemoConfig = DemoConfig()
    evaluation: EvalConfig = EvalConfig()

    @field_validator("seeds")
    @classmethod
    def check_seeds(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("at least one seed is required")
        if len(set(v)) != len(v):
            raise ValueError(f"seeds must be distinct, got {v}")
        return v

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        """Load and validate a run config file."""
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Re-validate with top-level keys replaced; `None` values are ignored."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.model_validate(data)

    def with_feature_loss(self, feature_loss: FeatureLossKind | None) -> "RunConfig":
        if feature_loss is None:
            return self
        data = self.model_dump()
        data["distill"]["feature_loss"] = feature_loss
        return RunConfig.model_validate(data)

    def config_hash(self) -> str:
        return hash_document(self.model_dump(mode="json"))

    @property
    def teacher_steps(self) -> int:
        return self.sac.train_steps[self.task]

    def teacher_spec(self, views: int | None = None) -> PolicySpec:
        return PolicySpec.build(self.network, views or self.teacher_views, self.with_state)

    def student_spec(self) -> PolicySpec:
        return PolicySpec.build(
            self.network, 1, self.with_state, image_size=self.distill.student_resolution
        )
