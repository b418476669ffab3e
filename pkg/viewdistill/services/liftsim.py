"""Kinematic grasp-and-lift environment with a delayed, latched success reward."""

import math
from typing import NamedTuple

import numpy as np

from viewdistill.core.exceptions import EpisodeFinishedError
from viewdistill.schemas.task import Action, SceneState, TaskConfig, TaskKind

TWO_PI = 2.0 * math.pi


class StepResult(NamedTuple):
    state: SceneState
    reward: float
    done: bool


def wrap_angle(angle: float) -> float:
    """Wrap to [-pi, pi]."""
    return math.remainder(angle, TWO_PI)


def pseudo_joints(state: SceneState) -> np.ndarray:
    """Smooth 7-vector standing in for arm joint angles.

    Base rotation and reach recover (x, y), height and yaw are carried through (yaw as its sine
    and cosine), so the map is injective on the workspace.
    """
    x, y, z = state.gripper_pos
    reach = math.hypot(x, y)
    return np.array(
        [
            math.atan2(y, x),
            reach - 0.5,
            z,
            0.5 * (reach + z),
            math.sin(state.gripper_yaw),
            math.cos(state.gripper_yaw),
            state.gripper_open,
        ],
        dtype=np.float64,
    )


def graspable_point(state: SceneState, config: TaskConfig) -> np.ndarray:
    """Where the gripper has to be to pick the object up.

    Cube: its center. Mug: a point just below the rim on the side opposite the handle, which
    points along the mug's local +x axis.
    """
    geo = config.geometry
    x, y, z = state.object_pos
    if state.object_kind == "cube":
        return np.array([x, y, z], dtype=np.float64)
    yaw = state.object_yaw
    return np.array(
        [
            x - geo.mug_radius * math.cos(yaw),
            y - geo.mug_radius * math.sin(yaw),
            z + geo.mug_height - geo.rim_grasp_depth,
        ],
        dtype=np.float64,
    )


def _with_joints(state: SceneState) -> SceneState:
    return state.model_copy(update={"q": tuple(float(v) for v in pseudo_joints(state))})


def reset(config: TaskConfig, object_kind: TaskKind, rng: np.random.Generator) -> SceneState:
    """Spawn the object uniformly in the spawn region with the gripper open at home."""
    region = config.spawn_region
    x = float(rng.uniform(*region.x))
    y = float(rng.uniform(*region.y))
    yaw = float(rng.uniform(0.0, TWO_PI)) if object_kind == "mug" else 0.0
    state = SceneState(
        object_kind=object_kind,
        object_pos=(x, y, config.rest_height(object_kind)),
        object_yaw=yaw,
        gripper_pos=config.home_position,
        gripper_yaw=0.0,
        gripper_open=1.0,
    )
    return _with_joints(state)


def step(state: SceneState, action: Action, config: TaskConfig) -> StepResult:
    """Advance one step. Pure: identical inputs give identical outputs."""
    if state.step_index >= config.episode_length:
        raise EpisodeFinishedError(
            f"episode already finished at step {state.step_index} "
            f"(horizon {config.episode_length})"
        )

    a = action.clamped()
    scales = config.action_scales
    gx, gy, gz = state.gripper_pos
    gripper_pos = config.workspace.clamp(
        (
            gx + a.dx * scales.position,
            gy + a.dy * scales.position,
            gz + a.dz * scales.position,
        )
    )
    gripper_yaw = wrap_angle(state.gripper_yaw + a.dyaw * scales.yaw)

    grasped = state.grasped
    grasp_offset = state.grasp_offset
    grasp_yaw_offset = state.grasp_yaw_offset
    object_pos = state.object_pos
    object_yaw = state.object_yaw
    rest_z = config.rest_height(state.object_kind)

    if a.grip > 0.0:
        if not grasped and state.gripper_open >= config.open_threshold:
            reach = np.linalg.norm(np.asarray(state.gripper_pos) - graspable_point(state, config))
            if reach <= config.grasp_radius:
                grasped = True
                grasp_offset = tuple(o - g for o, g in zip(state.object_pos, state.gripper_pos))
                grasp_yaw_offset = wrap_angle(state.object_yaw - state.gripper_yaw)
        gripper_open = max(0.0, state.gripper_open - a.grip * scales.grip)
    else:
        if grasped:
            # released objects fall straight down onto the table
            object_pos = (object_pos[0], object_pos[1], rest_z)
        grasped = False
        gripper_open = min(1.0, state.gripper_open - a.grip * scales.grip)

    if grasped:
        object_z = gripper_pos[2] + grasp_offset[2]
        if object_z < rest_z:
            gripper_pos = (gripper_pos[0], gripper_pos[1], gripper_pos[2] + rest_z - object_z)
            object_z = rest_z
        object_pos = (
            gripper_pos[0] + grasp_offset[0],
            gripper_pos[1] + grasp_offset[1],
            object_z,
        )
        object_yaw = wrap_angle(gripper_yaw + grasp_yaw_offset)

    success_now = grasped and object_pos[2] >= config.lift_height
    success_latched = state.success_latched or success_now
    next_index = state.step_index + 1

    next_state = _with_joints(
        state.model_copy(
            update={
                "object_pos": object_pos,
                "object_yaw": object_yaw,
                "gripper_pos": gripper_pos,
                "gripper_yaw": gripper_yaw,
                "gripper_open": gripper_open,
                "grasped": grasped,
                "grasp_offset": grasp_offset,
                "grasp_yaw_offset": grasp_yaw_offset,
                "step_index": next_index,
                "success_latched": success_latched,
            }
        )
    )
    reward = config.success_reward_per_step if success_latched else 0.0
    return StepResult(next_state, reward, next_index == config.episode_length)


def scripted_expert(
    state: SceneState,
    config: TaskConfig,
    rng: np.random.Generator | None = None,
    noise_std: float = 0.0,
) -> Action:
    """Waypoint controller: hover over the grasp point, descend, close, lift.

    With `noise_std > 0` Gaussian noise from `rng` perturbs the translation components.
    """
    scale = config.action_scales.position
    pos = np.asarray(state.gripper_pos, dtype=np.float64)

    if state.grasped:
        if state.object_pos[2] < config.lift_height + 0.03:
            command = np.array([0.0, 0.0, 1.0, 0.0, 1.0])
        else:
            command = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
        return _finish(command, rng, noise_std)

    target = graspable_point(state, config)
    error = target - pos
    yaw_target = state.object_yaw if state.object_kind == "mug" else 0.0
    dyaw = wrap_angle(yaw_target - state.gripper_yaw) / config.action_scales.yaw

    if state.gripper_open < config.open_threshold:
        # closed on nothing: reopen while backing off upward
        command = np.array([0.0, 0.0, 1.0, 0.0, -1.0])
    elif math.hypot(error[0], error[1]) > 0.01:
        hover_z = target[2] + 0.08
        command = np.array(
            [error[0] / scale, error[1] / scale, (hover_z - pos[2]) / scale, dyaw, -1.0]
        )
    elif pos[2] - target[2] > 0.01:
        command = np.array([error[0] / scale, error[1] / scale, error[2] / scale, dyaw, -1.0])
    else:
        command = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
    return _finish(command, rng, noise_std)


def _finish(command: np.ndarray, rng: np.random.Generator | None, noise_std: float) -> Action:
    if noise_std > 0.0 and rng is not None:
        command[:3] += rng.normal(0.0, noise_std, size=3)
    return Action.from_array(np.clip(command, -1.0, 1.0))


class LiftEnv:
    """Stateful wrapper holding the current `SceneState` of one episode."""

    def __init__(self, config: TaskConfig, task: TaskKind):
        self.config = config
        self.task = task
        self._state: SceneState | None = None

    @property
    def state(self) -> SceneState:
        if self._state is None:
            raise RuntimeError("call reset() before using the environment")
        return self._state

    def reset(self, rng: np.random.Generator) -> SceneState:
        self._state = reset(self.config, self.task, rng)
        return self._state

    def step(self, action: Action) -> StepResult:
        result = step(self.state, action, self.config)
        self._state = result.state
        return result
