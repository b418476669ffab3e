"""Metrics schemas - one CSV row per episode or evaluation trial."""

from typing import Literal

from pydantic import BaseModel, ConfigDict

from viewdistill.schemas.camera import CameraSpec

SCHEMA_VERSION = 1

Stage = Literal["demo", "teacher", "distill", "eval", "control"]
ViewMode = Literal["fixed", "random"]


class MetricsRecord(BaseModel):
    """Append-only per-episode row. Field order is the frozen CSV column order."""

    model_config = ConfigDict(frozen=True)

    schema_version: int = SCHEMA_VERSION
    config_hash: str
    stage: Stage
    policy: str
    task: str
    seed: int
    episode: int
    view_mode: ViewMode
    cam_eye_x: float
    cam_eye_y: float
    cam_eye_z: float
    cam_target_x: float
    cam_target_y: float
    cam_target_z: float
    cam_fov_deg: float
    cam_aspect: float
    episode_return: float
    success: int
    first_success_step: int
    steps: int
    kd_loss: float | None = None
    feature_loss: float | None = None
    wall_time: float = 0.0

    @staticmethod
    def camera_fields(cam: CameraSpec) -> dict[str, float]:
        return {
            "cam_eye_x": cam.eye[0],
            "cam_eye_y": cam.eye[1],
            "cam_eye_z": cam.eye[2],
            "cam_target_x": cam.target[0],
            "cam_target_y": cam.target[1],
            "cam_target_z": cam.target[2],
            "cam_fov_deg": cam.fov_deg,
            "cam_aspect": cam.aspect,
        }


CSV_COLUMNS: tuple[str, ...] = tuple(MetricsRecord.model_fields)


class EvalSummary(BaseModel):
    """Mean and population std across seeds of per-seed success rate and mean return."""

    model_config = ConfigDict(frozen=True)

    policy: str
    task: str
    view_mode: ViewMode
    seeds: int
    trials: int
    success_mean: float
    success_std: float
    return_mean: float
    return_std: float


SUMMARY_COLUMNS: tuple[str, ...] = tuple(EvalSummary.model_fields)
