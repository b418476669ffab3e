"""Tests for the evaluation protocol and its summary statistics."""

import numpy as np
import pytest

from viewdistill.core.exceptions import EmptyInputError, ShapeError
from viewdistill.core.rasterizer import read_ppm
from viewdistill.schemas.camera import CameraSetup
from viewdistill.schemas.metrics import MetricsRecord
from viewdistill.services.evaluation import evaluate, summarize
from viewdistill.services.rollout import AgentPolicy, ExpertPolicy, RandomPolicy


def eval_record(policy: str, seed: int, trial: int, success: int, ret: float, mode="fixed"):
    return MetricsRecord(
        config_hash="cafe",
        stage="eval",
        policy=policy,
        task="cube",
        seed=seed,
        episode=trial,
        view_mode=mode,
        **MetricsRecord.camera_fields(CameraSetup().front),
        episode_return=ret,
        success=success,
        first_success_step=50 if success else -1,
        steps=100,
    )


class TestEvaluate:
    def test_expert_always_succeeds(self, smoke_config):
        config = smoke_config
        records = evaluate(
            ExpertPolicy(config.env), config, config.cameras.rig(1), "fixed", 0, "expert"
        )
        assert len(records) == config.evaluation.trials
        horizon = config.env.episode_length
        for r in records:
            assert r.success == 1
            assert r.episode_return == 100.0 * (horizon - r.first_success_step)
            assert r.steps == horizon and r.stage == "eval"

    def test_random_actions_rarely_lift(self, smoke_config):
        policy = RandomPolicy(np.random.default_rng(0))
        records = evaluate(
            policy, smoke_config, smoke_config.cameras.rig(1), "fixed", 0, "random", trials=10
        )
        assert sum(r.success for r in records) <= 1

    def test_fixed_mode_reports_front_camera(self, smoke_config):
        records = evaluate(
            ExpertPolicy(smoke_config.env),
            smoke_config,
            smoke_config.cameras.rig(3),
            "fixed",
            0,
            "expert",
            trials=2,
        )
        front = MetricsRecord.camera_fields(smoke_config.cameras.front)
        assert all(r.cam_eye_x == front["cam_eye_x"] for r in records)

    def test_random_mode_redraws_camera_per_trial(self, smoke_config):
        records = evaluate(
            ExpertPolicy(smoke_config.env),
            smoke_config,
            smoke_config.cameras.rig(1),
            "random",
            0,
            "expert",
            trials=3,
        )
        eyes = {(r.cam_eye_x, r.cam_eye_y, r.cam_eye_z) for r in records}
        assert len(eyes) == 3
        assert all(r.view_mode == "random" for r in records)

    def test_same_seed_same_records(self, smoke_config):
        rig = smoke_config.cameras.rig(1)
        policy = ExpertPolicy(smoke_config.env)
        a = evaluate(policy, smoke_config, rig, "random", 5, "expert", trials=2)
        b = evaluate(policy, smoke_config, rig, "random", 5, "expert", trials=2)
        strip = [r.model_copy(update={"wall_time": 0.0}) for r in a]
        assert strip == [r.model_copy(update={"wall_time": 0.0}) for r in b]

    def test_fixed_and_random_modes_share_initial_states(self, smoke_config):
        rig = smoke_config.cameras.rig(1)
        policy = ExpertPolicy(smoke_config.env)
        fixed = evaluate(policy, smoke_config, rig, "fixed", 3, "expert", trials=4)
        moved = evaluate(policy, smoke_config, rig, "random", 3, "expert", trials=4)
        assert [r.first_success_step for r in fixed] == [r.first_success_step for r in moved]
        assert [r.episode_return for r in fixed] == [r.episode_return for r in moved]

    def test_view_count_mismatch_rejected(self, smoke_config, tiny_agent):
        with pytest.raises(ShapeError):
            evaluate(
                AgentPolicy(tiny_agent(3)),
                smoke_config,
                smoke_config.cameras.rig(1),
                "fixed",
                0,
                "t3cam",
                expected_views=3,
            )

    def test_frame_dump_writes_first_trial(self, smoke_config, tmp_path):
        evaluate(
            ExpertPolicy(smoke_config.env),
            smoke_config,
            smoke_config.cameras.rig(2),
            "fixed",
            0,
            "expert",
            trials=2,
            dump_dir=tmp_path,
            dump_frames=2,
        )
        frames = sorted(p.name for p in tmp_path.glob("*.ppm"))
        assert len(frames) == 4
        assert frames[0] == "expert_fixed_seed0_step000_view0.ppm"
        assert read_ppm(tmp_path / frames[0]).shape == (84, 84, 3)


class TestSummarize:
    def test_population_std_across_seeds(self):
        records = [
            eval_record("s_t3cam", 0, 0, 1, 200.0),
            eval_record("s_t3cam", 0, 1, 1, 400.0),
            eval_record("s_t3cam", 1, 0, 1, 100.0),
            eval_record("s_t3cam", 1, 1, 0, 0.0),
        ]
        (summary,) = summarize(records)
        assert summary.seeds == 2 and summary.trials == 4
        assert summary.success_mean == pytest.approx(0.75)
        assert summary.success_std == pytest.approx(0.25)
        assert summary.return_mean == pytest.approx(175.0)
        assert summary.return_std == pytest.approx(125.0)

    def test_groups_by_policy_and_mode(self):
        records = [
            eval_record("t3cam", 0, 0, 1, 100.0),
            eval_record("t3cam", 0, 0, 0, 0.0, mode="random"),
            eval_record("s_t3cam", 0, 0, 1, 100.0),
        ]
        keys = [(s.policy, s.view_mode) for s in summarize(records)]
        assert keys == [("s_t3cam", "fixed"), ("t3cam", "fixed"), ("t3cam", "random")]

    def test_single_seed_has_zero_spread(self):
        (summary,) = summarize([eval_record("t1cam", 3, 0, 1, 100.0)])
        assert summary.success_std == 0.0

    def test_no_rows_is_an_error(self):
        with pytest.raises(EmptyInputError):
            summarize([])

    def test_training_rows_are_ignored(self):
        row = eval_record("t3cam", 0, 0, 1, 100.0).model_copy(update={"stage": "teacher"})
        with pytest.raises(EmptyInputError):
            summarize([row])
