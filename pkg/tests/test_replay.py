"""Tests for the replay ring buffer and its spill file."""

import numpy as np
import pytest

from viewdistill.core.exceptions import ArchiveIntegrityError, ShapeError
from viewdistill.db.replay import ReplayBuffer, Transition, read_spill, write_spill
from viewdistill.schemas.task import ACTION_DIM, JOINT_DIM, TaskConfig

SIZE = 8


def make_transition(tag: int, views: int = 1, joint_dim: int = 0, reward: float = 0.0):
    """Transition whose pixels, action and joints all encode `tag`."""
    image = np.full((SIZE, SIZE, 3), tag % 256, dtype=np.uint8)
    q = np.full(joint_dim, float(tag), dtype=np.float32) if joint_dim else None
    return Transition(
        images=[image] * views,
        q=q,
        action=np.full(ACTION_DIM, tag / 1000.0, dtype=np.float32),
        reward=reward,
        done=tag % 5 == 4,
        next_images=[image + 1] * views,
        next_q=q,
    )


def tags(buffer: ReplayBuffer) -> list[int]:
    return [int(t.images[0][0, 0, 0]) for t, _ in buffer.ordered()]


class TestReplayBuffer:
    def test_fifo_order_below_capacity(self):
        buffer = ReplayBuffer(10, 1, SIZE)
        for i in range(4):
            buffer.push(make_transition(i))
        assert len(buffer) == 4
        assert tags(buffer) == [0, 1, 2, 3]

    def test_oldest_evicted_at_capacity(self):
        buffer = ReplayBuffer(5, 1, SIZE)
        for i in range(6):
            buffer.push(make_transition(i))
        assert len(buffer) == 5
        assert tags(buffer) == [1, 2, 3, 4, 5]

    @pytest.mark.slow
    def test_full_size_capacity_boundary(self):
        buffer = ReplayBuffer(50_000, 1, SIZE)
        for i in range(50_001):
            buffer.push(make_transition(i))
        assert len(buffer) == 50_000
        first, _ = next(iter(buffer.ordered()))
        assert int(first.images[0][0, 0, 0]) == 1

    def test_demo_frequency_matches_share(self):
        buffer = ReplayBuffer(1000, 1, SIZE)
        for i in range(1000):
            buffer.push(make_transition(i), is_demo=i < 250)
        rng = np.random.default_rng(0)
        draws = np.concatenate([buffer.sample(100, rng).is_demo for _ in range(100)])
        # 10^4 Bernoulli(0.25) draws: std of the mean is about 0.0043
        assert abs(draws.mean() - 0.25) < 0.02

    def test_sample_shapes(self):
        buffer = ReplayBuffer(20, 3, SIZE, joint_dim=JOINT_DIM)
        for i in range(20):
            buffer.push(make_transition(i, views=3, joint_dim=JOINT_DIM))
        batch = buffer.sample(7, np.random.default_rng(1))
        assert batch.obs.shape == (7, 3, SIZE, SIZE, 3)
        assert batch.obs.dtype == np.uint8
        assert batch.q.shape == (7, JOINT_DIM)
        assert batch.done.dtype == np.float32

    def test_empty_buffer_cannot_sample(self):
        with pytest.raises(ValueError):
            ReplayBuffer(4, 1, SIZE).sample(2, np.random.default_rng(0))

    def test_wrong_view_count_rejected(self):
        buffer = ReplayBuffer(4, 3, SIZE)
        with pytest.raises(ShapeError):
            buffer.push(make_transition(0, views=1))

    def test_missing_joints_rejected(self):
        buffer = ReplayBuffer(4, 1, SIZE, joint_dim=JOINT_DIM)
        with pytest.raises(ShapeError):
            buffer.push(make_transition(0))

    def test_reward_must_be_zero_or_hundred(self):
        buffer = ReplayBuffer(4, 1, SIZE)
        with pytest.raises(ValueError):
            buffer.push(make_transition(0, reward=3.0))

    def test_success_reward_follows_task_config(self):
        reward = TaskConfig(success_reward_per_step=2.5).success_reward_per_step
        buffer = ReplayBuffer(4, 1, SIZE, success_reward=reward)
        buffer.push(make_transition(0, reward=2.5))
        buffer.push(make_transition(1, reward=0.0))
        with pytest.raises(ValueError):
            buffer.push(make_transition(2, reward=100.0))
        assert len(buffer) == 2

    def test_extend_keeps_order_and_flags(self):
        demos = ReplayBuffer(3, 1, SIZE)
        for i in range(3):
            demos.push(make_transition(i), is_demo=True)
        buffer = ReplayBuffer(10, 1, SIZE)
        buffer.extend(demos)
        buffer.push(make_transition(9))
        assert tags(buffer) == [0, 1, 2, 9]
        assert [flag for _, flag in buffer.ordered()] == [True, True, True, False]

    def test_state_dict_round_trip(self):
        buffer = ReplayBuffer(4, 1, SIZE)
        for i in range(6):
            buffer.push(make_transition(i))
        restored = ReplayBuffer(4, 1, SIZE)
        restored.load_state_dict(buffer.state_dict())
        assert tags(restored) == tags(buffer)
        assert restored.cursor == buffer.cursor


class TestSpill:
    def test_spill_preserves_transitions(self, tmp_path):
        buffer = ReplayBuffer(6, 2, SIZE, joint_dim=JOINT_DIM)
        for i in range(8):
            t = make_transition(i, 2, JOINT_DIM, reward=100.0 * (i > 5))
            buffer.push(t, is_demo=i % 2 == 0)
        loaded = read_spill(write_spill(buffer, tmp_path / "demos.vdr"))
        assert len(loaded) == 6
        for (a, flag_a), (b, flag_b) in zip(buffer.ordered(), loaded.ordered()):
            assert flag_a == flag_b
            np.testing.assert_array_equal(np.stack(a.images), np.stack(b.images))
            np.testing.assert_array_equal(a.next_q, b.next_q)
            np.testing.assert_array_equal(a.action, b.action)
            assert (a.reward, a.done) == (b.reward, b.done)

    def test_spill_is_byte_stable(self, tmp_path):
        buffer = ReplayBuffer(3, 1, SIZE)
        for i in range(3):
            buffer.push(make_transition(i))
        a = write_spill(buffer, tmp_path / "a.vdr").read_bytes()
        b = write_spill(buffer, tmp_path / "b.vdr").read_bytes()
        assert a == b

    def test_truncated_spill_rejected(self, tmp_path):
        buffer = ReplayBuffer(3, 1, SIZE)
        buffer.push(make_transition(1))
        path = write_spill(buffer, tmp_path / "demos.vdr")
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(ArchiveIntegrityError):
            read_spill(path)
