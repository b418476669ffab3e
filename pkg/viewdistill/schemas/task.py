"""Task schemas - lift task configuration, scene state and actions."""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from viewdistill.schemas.camera import Interval, Vec3

TaskKind = Literal["cube", "mug"]
ACTION_DIM = 5
JOINT_DIM = 7


class ActionScales(BaseModel):
    """Per-component scaling from normalized actions to world units per step."""

    model_config = ConfigDict(frozen=True)

    position: float = Field(default=0.02, gt=0.0)  # m/step
    yaw: float = Field(default=0.1, gt=0.0)  # rad/step
    grip: float = Field(default=0.5, gt=0.0)  # opening fraction/step


class Workspace(BaseModel):
    """Axis-aligned box the gripper is confined to."""

    model_config = ConfigDict(frozen=True)

    x: Interval = (0.2, 0.8)
    y: Interval = (-0.35, 0.35)
    z: Interval = (0.0, 0.5)

    @field_validator("x", "y", "z")
    @classmethod
    def check_ordered(cls, v: Interval) -> Interval:
        if v[0] > v[1]:
            raise ValueError(f"interval min {v[0]} exceeds max {v[1]}")
        return v

    def clamp(self, p: Vec3) -> Vec3:
        return (
            min(max(p[0], self.x[0]), self.x[1]),
            min(max(p[1], self.y[0]), self.y[1]),
            min(max(p[2], self.z[0]), self.z[1]),
        )


class SpawnRegion(BaseModel):
    """Axis-aligned rectangle on the table where objects appear."""

    model_config = ConfigDict(frozen=True)

    x: Interval = (0.4, 0.6)
    y: Interval = (-0.12, 0.12)

    @field_validator("x", "y")
    @classmethod
    def check_ordered(cls, v: Interval) -> Interval:
        if v[0] > v[1]:
            raise ValueError(f"interval min {v[0]} exceeds max {v[1]}")
        return v


class ObjectGeometry(BaseModel):
    """Parametric shapes: a cube, and a mug made of a cylinder plus a handle box."""

    model_config = ConfigDict(frozen=True)

    cube_half_extent: float = Field(default=0.06, gt=0.0)
    mug_radius: float = Field(default=0.06, gt=0.0)
    mug_height: float = Field(default=0.12, gt=0.0)
    rim_grasp_depth: float = Field(default=0.015, ge=0.0)
    handle_length: float = Field(default=0.04, gt=0.0)
    handle_width: float = Field(default=0.015, gt=0.0)
    handle_height: float = Field(default=0.06, gt=0.0)


class TaskConfig(BaseModel):
    """Lift task: fixed horizon, delayed +100 reward once the object is held above lift height."""

    model_config = ConfigDict(frozen=True)

    episode_length: int = Field(default=100, gt=0)
    lift_height: float = Field(default=0.15, gt=0.0)
    spawn_region: SpawnRegion = SpawnRegion()
    workspace: Workspace = Workspace()
    grasp_radius: float = Field(default=0.03, gt=0.0)
    open_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    success_reward_per_step: float = 100.0
    action_scales: ActionScales = ActionScales()
    home_position: Vec3 = (0.5, 0.0, 0.35)
    table_height: float = 0.0
    geometry: ObjectGeometry = ObjectGeometry()

    @model_validator(mode="after")
    def check_spawn_inside_workspace(self) -> "TaskConfig":
        ws, sp = self.workspace, self.spawn_region
        if sp.x[0] < ws.x[0] or sp.x[1] > ws.x[1] or sp.y[0] < ws.y[0] or sp.y[1] > ws.y[1]:
            raise ValueError("spawn_region must lie inside the workspace")
        if self.workspace.clamp(self.home_position) != self.home_position:
            raise ValueError("home_position must lie inside the workspace")
        return self

    def rest_height(self, kind: TaskKind) -> float:
        """Height of the object's reference point when it rests on the table."""
        if kind == "cube":
            return self.table_height + self.geometry.cube_half_extent
        return self.table_height


class SceneState(BaseModel):
    """Full kinematic state of one episode.

    `object_pos` is the cube center or the mug's base center. While `grasped`, the object sits at
    `gripper_pos + grasp_offset` with yaw `gripper_yaw + grasp_yaw_offset`.
    """

    model_config = ConfigDict(frozen=True)

    object_kind: TaskKind
    object_pos: Vec3
    object_yaw: float = 0.0
    gripper_pos: Vec3
    gripper_yaw: float = 0.0
    gripper_open: float = Field(default=1.0, ge=0.0, le=1.0)
    grasped: bool = False
    grasp_offset: Vec3 = (0.0, 0.0, 0.0)
    grasp_yaw_offset: float = 0.0
    step_index: int = 0
    success_latched: bool = False
    q: tuple[float, ...] = (0.0,) * JOINT_DIM


class Action(BaseModel):
    """Normalized end-effector command. Components are clamped to [-1, 1] before use."""

    model_config = ConfigDict(frozen=True)

    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0
    dyaw: float = 0.0
    grip: float = 0.0  # > 0 closes, <= 0 opens

    @classmethod
    def from_array(cls, values) -> "Action":
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        if arr.shape[0] != ACTION_DIM:
            raise ValueError(f"action needs {ACTION_DIM} components, got {arr.shape[0]}")
        return cls(dx=arr[0], dy=arr[1], dz=arr[2], dyaw=arr[3], grip=arr[4])

    def to_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz, self.dyaw, self.grip], dtype=np.float32)

    def clamped(self) -> "Action":
        return Action(**{k: min(max(v, -1.0), 1.0) for k, v in self.model_dump().items()})
