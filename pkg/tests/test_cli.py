"""Tests for the command-line verbs and the stage artifacts they leave behind."""

import json

import pytest

from tests.conftest import DATA_DIR
from viewdistill.core.camgeo import sample_camera
from viewdistill.db.metrics import read_metrics
from viewdistill.db.replay import read_spill
from viewdistill.db.seed import generate_demos
from viewdistill.main import build_parser, main
from viewdistill.schemas.camera import CameraSetup
from viewdistill.schemas.run import RunConfig
from viewdistill.services.runner import RunPaths

SMOKE = str(DATA_DIR / "smoke_run.json")


def run_cli(verb: str, out, *extra: str) -> int:
    return main([verb, "--config", SMOKE, "--out", str(out), "--seed", "0", *extra])


class TestParser:
    @pytest.mark.parametrize(
        "verb", ["gen-demos", "train-teacher", "distill", "evaluate", "plot", "negative-control"]
    )
    def test_verbs_registered(self, verb):
        args = build_parser().parse_args([verb])
        assert args.command == verb
        assert callable(args.handler)

    def test_unknown_verb_exits(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["train-everything"])

    def test_feature_loss_flag(self):
        args = build_parser().parse_args(["distill", "--feature-loss", "sim", "--views", "2"])
        assert args.feature_loss == "sim" and args.views == 2


class TestDemos:
    def test_every_demo_episode_succeeds(self, smoke_config):
        result = generate_demos(smoke_config, 0, views=1)
        horizon = smoke_config.env.episode_length
        assert len(result.buffer) == smoke_config.demos.episodes * horizon
        assert all(flag for _, flag in result.buffer.ordered())
        assert all(r.success == 1 and r.stage == "demo" for r in result.records)

    def test_demo_buffer_uses_configured_reward(self, smoke_config):
        data = smoke_config.model_dump()
        data["env"]["success_reward_per_step"] = 2.5
        config = RunConfig.model_validate(data)
        result = generate_demos(config, 0, views=1)
        rewards = {t.reward for t, _ in result.buffer.ordered()}
        assert rewards == {0.0, 2.5}

    def test_random_camera_demos_record_their_camera(self, smoke_config):
        base = smoke_config.cameras.student_rig()
        camera_range = smoke_config.distill.curriculum.max_range

        def random_rig(episode, rng):
            return base.with_front(sample_camera(camera_range, rng))

        result = generate_demos(
            smoke_config, 0, rig_for_episode=random_rig, views=1, view_mode="random"
        )
        front_x = CameraSetup().front.eye[0]
        assert any(r.cam_eye_x != front_x for r in result.records)
        assert all(r.view_mode == "random" for r in result.records)

    def test_gen_demos_is_byte_deterministic(self, tmp_path):
        assert run_cli("gen-demos", tmp_path / "a", "--views", "1") == 0
        assert run_cli("gen-demos", tmp_path / "b", "--views", "1") == 0
        name = "demos/cube_1cam_seed0.vdr"
        first = (tmp_path / "a" / name).read_bytes()
        assert first == (tmp_path / "b" / name).read_bytes()
        assert len(read_spill(tmp_path / "a" / name)) == 3 * 40
        assert len(read_metrics(tmp_path / "a" / "demos" / "cube_1cam_seed0.csv")) == 3


class TestExitCodes:
    def test_missing_demos_is_a_dependency_error(self, tmp_path):
        assert run_cli("train-teacher", tmp_path) == 2

    def test_missing_teacher_is_a_dependency_error(self, tmp_path):
        assert run_cli("distill", tmp_path) == 2

    def test_invalid_config_is_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"seeds": [1, 1]}))
        assert main(["gen-demos", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_plot_without_metrics_is_an_error(self, tmp_path):
        assert run_cli("plot", tmp_path) == 2


class TestEvaluateVerb:
    def test_expert_evaluation_writes_summary(self, tmp_path):
        code = run_cli(
            "evaluate", tmp_path, "--policy", "expert", "--trials", "2", "--view-mode", "random"
        )
        assert code == 0
        eval_dir = tmp_path / "eval"
        rows = read_metrics(eval_dir / "expert_cube_random_seed0.csv")
        assert [r.success for r in rows] == [1, 1]
        assert (eval_dir / "summary.csv").exists()
        assert "| expert | cube |" in (eval_dir / "summary.md").read_text()


@pytest.mark.slow
class TestPipeline:
    def test_smoke_pipeline_end_to_end(self, smoke_config, tmp_path):
        out = tmp_path / "run"
        for verb in ("gen-demos", "train-teacher", "distill"):
            assert run_cli(verb, out, "--views", "1") == 0
        paths = RunPaths(smoke_config.with_overrides(teacher_views=1))
        assert (paths.teacher_dir(0) / "params.vdp").exists()
        assert (paths.student_dir(0) / "params.vdp").exists()
        for policy in ("teacher", "student"):
            assert run_cli("evaluate", out, "--views", "1", "--policy", policy) == 0
        assert run_cli("plot", out, "--views", "1") == 0
        assert (out / "figures" / "teacher_returns.png").exists()
        assert (out / "figures" / "distill_returns.png").exists()

    def test_negative_control(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("negative-control", out) == 0
        rows = read_metrics(out / "control_cube" / "seed0" / "metrics.csv")
        assert all(r.stage == "control" and r.policy == "c1cam" for r in rows)
        assert run_cli("evaluate", out, "--policy", "control", "--view-mode", "random") == 0
