"""Tests for the lift environment, its reward law and the scripted expert."""

import math

import numpy as np
import pytest

from viewdistill.core.exceptions import EpisodeFinishedError
from viewdistill.schemas.task import Action, SpawnRegion, TaskConfig, Workspace
from viewdistill.services.liftsim import (
    LiftEnv,
    graspable_point,
    pseudo_joints,
    reset,
    scripted_expert,
    step,
)


def run_expert(config: TaskConfig, kind: str, seed: int) -> tuple[float, int, bool]:
    """Roll the noiseless expert; returns (return, first success step, latched)."""
    env = LiftEnv(config, kind)
    state = env.reset(np.random.default_rng(seed))
    total, first, done = 0.0, -1, False
    while not done:
        state, reward, done = env.step(scripted_expert(state, config))
        if reward > 0 and first < 0:
            first = state.step_index - 1
        total += reward
    return total, first, state.success_latched


class TestReset:
    def test_zero_area_spawn_region(self, rng):
        config = TaskConfig(spawn_region=SpawnRegion(x=(0.5, 0.5), y=(0.1, 0.1)))
        for _ in range(5):
            state = reset(config, "cube", rng)
            assert state.object_pos[:2] == (0.5, 0.1)

    def test_same_seed_same_state(self, task_config):
        a = reset(task_config, "mug", np.random.default_rng(3))
        b = reset(task_config, "mug", np.random.default_rng(3))
        assert a == b

    def test_spawn_covers_region(self, rng):
        config = TaskConfig(
            spawn_region=SpawnRegion(x=(0.0, 0.4), y=(0.0, 0.3)),
            workspace=Workspace(x=(0.0, 0.8)),
        )
        xs, ys = [], []
        for _ in range(10_000):
            state = reset(config, "cube", rng)
            xs.append(state.object_pos[0])
            ys.append(state.object_pos[1])
        assert max(xs) - min(xs) >= 0.95 * 0.4
        assert max(ys) - min(ys) >= 0.95 * 0.3

    def test_objects_rest_on_table(self, task_config, rng):
        cube = reset(task_config, "cube", rng)
        mug = reset(task_config, "mug", rng)
        assert cube.object_pos[2] == pytest.approx(task_config.geometry.cube_half_extent)
        assert mug.object_pos[2] == pytest.approx(task_config.table_height)
        assert cube.gripper_open == 1.0 and not cube.grasped


class TestStep:
    def test_return_counts_steps_after_first_success(self, task_config):
        total, first, latched = run_expert(task_config, "cube", 0)
        assert latched
        assert total == 100.0 * (task_config.episode_length - first)

    def test_idle_policy_earns_nothing(self, task_config, rng):
        env = LiftEnv(task_config, "cube")
        env.reset(rng)
        total, done = 0.0, False
        while not done:
            _, reward, done = env.step(Action())
            total += reward
        assert total == 0.0

    @pytest.mark.slow
    def test_reward_latches_under_mixed_policies(self, task_config):
        rng = np.random.default_rng(21)
        env = LiftEnv(task_config, "cube")
        horizon = task_config.episode_length
        outcomes = set()
        for episode in range(1000):
            # a third random, a third noisy expert, a third switching between the two
            random_share = (1.0, 0.0, 0.3)[episode % 3]
            state = env.reset(rng)
            rewards, done = [], False
            while not done:
                if rng.random() < random_share:
                    action = Action.from_array(rng.uniform(-1.0, 1.0, size=5))
                else:
                    action = scripted_expert(state, task_config, rng, noise_std=0.3)
                state, reward, done = env.step(action)
                rewards.append(reward)
            positive = [k for k, r in enumerate(rewards) if r > 0]
            if positive:
                first = positive[0]
                assert rewards[first:] == [100.0] * (horizon - first)
                assert sum(rewards) == 100.0 * (horizon - first)
            else:
                assert sum(rewards) == 0.0
            assert state.success_latched == bool(positive)
            outcomes.add(bool(positive))
        assert outcomes == {True, False}

    def test_episode_has_fixed_horizon(self, rng):
        config = TaskConfig(episode_length=7)
        env = LiftEnv(config, "cube")
        env.reset(rng)
        dones = [env.step(Action()).done for _ in range(7)]
        assert dones == [False] * 6 + [True]
        with pytest.raises(EpisodeFinishedError):
            env.step(Action())

    def test_step_is_pure(self, task_config, rng):
        state = reset(task_config, "mug", rng)
        action = Action(dx=0.3, dz=-0.5, dyaw=0.2, grip=-1.0)
        assert step(state, action, task_config) == step(state, action, task_config)

    def test_actions_are_clamped(self, task_config, rng):
        state = reset(task_config, "cube", rng)
        big = step(state, Action(dx=5.0), task_config).state
        unit = step(state, Action(dx=1.0), task_config).state
        assert big.gripper_pos == unit.gripper_pos

    def test_gripper_stays_in_workspace(self, task_config, rng):
        env = LiftEnv(task_config, "cube")
        state = env.reset(rng)
        for _ in range(40):
            state, _, _ = env.step(Action(dx=1.0, dy=-1.0, dz=1.0))
        ws = task_config.workspace
        assert state.gripper_pos == (ws.x[1], ws.y[0], ws.z[1])

    def test_release_drops_object(self, task_config):
        env = LiftEnv(task_config, "cube")
        state = env.reset(np.random.default_rng(1))
        while not state.success_latched:
            state, _, _ = env.step(scripted_expert(state, task_config))
        state, reward, _ = env.step(Action(grip=-1.0))
        assert not state.grasped
        assert state.object_pos[2] == pytest.approx(task_config.rest_height("cube"))
        # success stays latched after release
        assert reward == 100.0

    def test_closing_far_from_object_grasps_nothing(self, task_config, rng):
        state = reset(task_config, "cube", rng)
        state = step(state, Action(grip=1.0), task_config).state
        assert not state.grasped
        assert state.gripper_open < 1.0


class TestGraspablePoint:
    def test_cube_center(self, task_config, rng):
        state = reset(task_config, "cube", rng)
        x, y, _ = state.object_pos
        np.testing.assert_allclose(
            graspable_point(state, task_config), [x, y, task_config.geometry.cube_half_extent]
        )

    def test_mug_grasp_opposite_handle(self, task_config, rng):
        geo = task_config.geometry
        state = reset(task_config, "mug", rng).model_copy(update={"object_yaw": 0.0})
        x, y, z = state.object_pos
        np.testing.assert_allclose(
            graspable_point(state, task_config),
            [x - geo.mug_radius, y, z + geo.mug_height - geo.rim_grasp_depth],
        )

    def test_mug_offset_rotates_with_yaw(self, task_config, rng):
        base = reset(task_config, "mug", rng)
        center = np.array(base.object_pos)
        at_zero = graspable_point(base.model_copy(update={"object_yaw": 0.0}), task_config)
        turned = graspable_point(
            base.model_copy(update={"object_yaw": math.pi / 2}), task_config
        )
        ox, oy = (at_zero - center)[:2]
        rotated = np.array([-oy, ox])
        np.testing.assert_allclose((turned - center)[:2], rotated, atol=1e-12)
        assert turned[2] == pytest.approx(at_zero[2])


class TestScriptedExpert:
    def test_moves_toward_object_horizontally(self, task_config, rng):
        state = reset(task_config, "cube", rng)
        action = scripted_expert(state, task_config)
        dx = state.object_pos[0] - state.gripper_pos[0]
        dy = state.object_pos[1] - state.gripper_pos[1]
        if abs(dx) > 1e-6:
            assert math.copysign(1.0, action.dx) == math.copysign(1.0, dx)
        if abs(dy) > 1e-6:
            assert math.copysign(1.0, action.dy) == math.copysign(1.0, dy)

    def test_lifts_while_grasped_below_target(self, task_config):
        env = LiftEnv(task_config, "cube")
        state = env.reset(np.random.default_rng(2))
        while not state.grasped:
            state, _, _ = env.step(scripted_expert(state, task_config))
        action = scripted_expert(state, task_config)
        assert action.dz > 0.0
        assert action.grip > 0.0

    @pytest.mark.parametrize("kind", ["cube", "mug"])
    def test_expert_succeeds_on_sampled_spawns(self, task_config, kind):
        successes = sum(run_expert(task_config, kind, seed)[2] for seed in range(50))
        assert successes == 50

    @pytest.mark.slow
    @pytest.mark.parametrize("kind", ["cube", "mug"])
    def test_expert_success_rate(self, task_config, kind):
        successes = sum(run_expert(task_config, kind, seed)[2] for seed in range(1000))
        assert successes >= 990

    def test_noisy_actions_stay_bounded(self, task_config, rng):
        state = reset(task_config, "cube", rng)
        for _ in range(20):
            action = scripted_expert(state, task_config, rng, noise_std=2.0)
            assert np.all(np.abs(action.to_array()) <= 1.0)


class TestPseudoJoints:
    def test_home_pose_is_stable(self, task_config, rng):
        a = reset(task_config, "cube", rng)
        b = reset(task_config, "mug", rng)
        np.testing.assert_array_equal(pseudo_joints(a), pseudo_joints(b))
        assert pseudo_joints(a).shape == (7,)

    def test_distinct_poses_distinct_vectors(self, task_config, rng):
        state = reset(task_config, "cube", rng)
        seen = []
        for _ in range(100):
            pose = state.model_copy(
                update={
                    "gripper_pos": tuple(rng.uniform([0.2, -0.3, 0.0], [0.8, 0.3, 0.5])),
                    "gripper_yaw": float(rng.uniform(-math.pi, math.pi)),
                    "gripper_open": float(rng.uniform(0, 1)),
                }
            )
            seen.append(pseudo_joints(pose))
        stacked = np.stack(seen)
        gaps = np.linalg.norm(stacked[:, None] - stacked[None], axis=-1)
        np.fill_diagonal(gaps, 1.0)
        assert gaps.min() > 0.0

    def test_bounded_slope_in_x(self, task_config, rng):
        state = reset(task_config, "cube", rng)
        eps = 1e-6
        x, y, z = state.gripper_pos
        moved = state.model_copy(update={"gripper_pos": (x + eps, y, z)})
        slope = np.linalg.norm(pseudo_joints(moved) - pseudo_joints(state)) / eps
        assert slope < 10.0

    def test_state_carries_joints(self, task_config, rng):
        state = reset(task_config, "cube", rng)
        np.testing.assert_allclose(state.q, pseudo_joints(state))
