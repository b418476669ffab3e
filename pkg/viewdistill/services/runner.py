"""Pipeline stages: artifact layout, seeding and per-seed fan-out."""

import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Literal, TypeVar

import numpy as np
import torch

from viewdistill.config import get_settings
from viewdistill.core.camgeo import sample_camera
from viewdistill.core.exceptions import DependencyError
from viewdistill.db.metrics import MetricsWriter, read_many
from viewdistill.db.replay import read_spill, write_spill
from viewdistill.db.seed import generate_demos
from viewdistill.models.archive import load_params, save_params
from viewdistill.models.policy import Agent
from viewdistill.schemas.metrics import EvalSummary, MetricsRecord, ViewMode
from viewdistill.schemas.run import RunConfig
from viewdistill.schemas.training import PolicySpec
from viewdistill.services.distill import distill_student, student_name
from viewdistill.services.evaluation import evaluate, summarize
from viewdistill.services.plotting import (
    plot_training_curves,
    render_summary_table,
    write_summary_csv,
)
from viewdistill.services.rollout import AgentPolicy, ExpertPolicy, Policy, RandomPolicy
from viewdistill.services.sac import train_teacher

logger = logging.getLogger(__name__)

PolicyKind = Literal["teacher", "student", "control", "expert", "random"]
PARAMS_NAME = "params.vdp"
T = TypeVar("T")


class RunPaths:
    """Where each stage reads and writes, under the run's output directory."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.root = Path(config.output_dir)

    def demos(self, seed: int, views: int | None = None) -> Path:
        views = views or self.config.teacher_views
        return self.root / "demos" / f"{self.config.task}_{views}cam_seed{seed}.vdr"

    def teacher_dir(self, seed: int, views: int | None = None) -> Path:
        views = views or self.config.teacher_views
        return self.root / f"teacher_{self.config.task}_{views}cam" / f"seed{seed}"

    def student_dir(self, seed: int) -> Path:
        cfg = self.config
        name = f"student_{cfg.task}_t{cfg.teacher_views}cam_{cfg.distill.feature_loss}"
        return self.root / name / f"seed{seed}"

    def control_dir(self, seed: int) -> Path:
        return self.root / f"control_{self.config.task}" / f"seed{seed}"

    def eval_dir(self) -> Path:
        return self.root / "eval"

    def figures_dir(self) -> Path:
        return self.root / "figures"


def seed_everything(seed: int) -> None:
    settings = get_settings()
    np.random.seed(seed)
    torch.manual_seed(seed)
    torch.set_num_threads(settings.torch_threads)
    torch.use_deterministic_algorithms(True)


def fan_out(fn: Callable[[int], T], seeds: Iterable[int], workers: int | None = None) -> list[T]:
    """Run `fn(seed)` for every seed, in independent processes when `workers > 1`."""
    seeds = list(seeds)
    workers = workers or get_settings().workers
    if workers <= 1 or len(seeds) == 1:
        return [fn(seed) for seed in seeds]
    with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
        return list(pool.map(fn, seeds))


def _fresh_writer(path: Path, resume: bool) -> MetricsWriter:
    if not resume and path.exists():
        path.unlink()
    return MetricsWriter(path)


def gen_demos(config: RunConfig, seed: int, views: int | None = None) -> Path:
    seed_everything(seed)
    paths = RunPaths(config)
    views = views or config.teacher_views
    result = generate_demos(config, seed, views=views)
    target = paths.demos(seed, views)
    write_spill(result.buffer, target)
    writer = _fresh_writer(target.with_suffix(".csv"), resume=False)
    writer.extend(result.records)
    return target


def train_teacher_seed(config: RunConfig, seed: int, resume: bool = False) -> Path:
    seed_everything(seed)
    paths = RunPaths(config)
    demo_path = paths.demos(seed)
    if not demo_path.exists():
        raise DependencyError(f"demo file {demo_path} is missing; run gen-demos first")
    demos = read_spill(demo_path, success_reward=config.env.success_reward_per_step)
    directory = paths.teacher_dir(seed)
    writer = _fresh_writer(directory / "metrics.csv", resume)
    result = train_teacher(
        config, seed, demos, checkpoint_dir=directory, writer=writer, resume=resume
    )
    return save_params(result.params, directory / PARAMS_NAME)


def load_agent(spec: PolicySpec, path: Path) -> Agent:
    """Build an agent for `spec` and load parameters, rejecting another architecture's."""
    if not path.exists():
        raise DependencyError(f"checkpoint {path} is missing")
    agent = Agent.build(spec)
    agent.load_parameter_set(load_params(path, expected_fingerprint=spec.fingerprint()))
    agent.eval()
    return agent


def distill_seed(config: RunConfig, seed: int, resume: bool = False) -> Path:
    seed_everything(seed)
    paths = RunPaths(config)
    teacher = load_agent(config.teacher_spec(), paths.teacher_dir(seed) / PARAMS_NAME)
    directory = paths.student_dir(seed)
    writer = _fresh_writer(directory / "metrics.csv", resume)
    result = distill_student(
        config, seed, teacher, checkpoint_dir=directory, writer=writer, resume=resume
    )
    return save_params(result.params, directory / PARAMS_NAME)


def negative_control_seed(config: RunConfig, seed: int, resume: bool = False) -> Path:
    """Single-view SAC from scratch with a fresh random camera every episode, no distillation."""
    seed_everything(seed)
    paths = RunPaths(config)
    base = config.cameras.student_rig()
    camera_range = config.distill.curriculum.max_range

    def random_rig(episode: int, rng: np.random.Generator):
        return base.with_front(sample_camera(camera_range, rng))

    demos = generate_demos(
        config, seed, rig_for_episode=random_rig, views=1, view_mode="random"
    ).buffer
    directory = paths.control_dir(seed)
    writer = _fresh_writer(directory / "metrics.csv", resume)
    result = train_teacher(
        config,
        seed,
        demos,
        views=1,
        rig_for_episode=random_rig,
        stage="control",
        policy="c1cam",
        checkpoint_dir=directory,
        writer=writer,
        resume=resume,
    )
    return save_params(result.params, directory / PARAMS_NAME)


def build_policy(config: RunConfig, kind: PolicyKind, seed: int) -> tuple[Policy, str, int, int]:
    """Policy, its metrics name, its view count and its input resolution."""
    paths = RunPaths(config)
    views = config.teacher_views
    if kind == "teacher":
        agent = load_agent(config.teacher_spec(), paths.teacher_dir(seed) / PARAMS_NAME)
        return AgentPolicy(agent), f"t{views}cam", views, 84
    if kind == "student":
        spec = config.student_spec()
        agent = load_agent(spec, paths.student_dir(seed) / PARAMS_NAME)
        name = student_name(views, config.distill.feature_loss)
        return AgentPolicy(agent), name, 1, spec.encoder.image_size
    if kind == "control":
        agent = load_agent(config.teacher_spec(1), paths.control_dir(seed) / PARAMS_NAME)
        return AgentPolicy(agent), "c1cam", 1, 84
    if kind == "expert":
        return ExpertPolicy(config.env), "expert", 1, 84
    return RandomPolicy(np.random.default_rng(seed)), "random", 1, 84


def evaluate_seed(
    config: RunConfig,
    seed: int,
    kind: PolicyKind,
    view_mode: ViewMode,
    trials: int | None = None,
    dump_frames: int = 0,
) -> list[MetricsRecord]:
    seed_everything(seed)
    paths = RunPaths(config)
    policy, name, views, size = build_policy(config, kind, seed)
    rig = config.cameras.rig(views) if kind == "teacher" else config.cameras.student_rig()
    records = evaluate(
        policy,
        config,
        rig,
        view_mode,
        seed,
        name,
        trials=trials,
        image_size=size,
        expected_views=views,
        dump_dir=paths.eval_dir() / "frames" if dump_frames else None,
        dump_frames=dump_frames,
    )
    target = paths.eval_dir() / f"{name}_{config.task}_{view_mode}_seed{seed}.csv"
    writer = _fresh_writer(target, resume=False)
    writer.extend(records)
    return records


def run_evaluation(
    config: RunConfig,
    kind: PolicyKind,
    view_mode: ViewMode,
    trials: int | None = None,
    dump_frames: int = 0,
) -> list[EvalSummary]:
    per_seed = fan_out(
        partial(
            evaluate_seed,
            config,
            kind=kind,
            view_mode=view_mode,
            trials=trials,
            dump_frames=dump_frames,
        ),
        config.seeds,
    )
    summaries = summarize([r for records in per_seed for r in records])
    refresh_summary(config)
    return summaries


def refresh_summary(config: RunConfig) -> list[EvalSummary]:
    """Recompute summary.csv and summary.md from every per-trial file in the eval directory."""
    eval_dir = RunPaths(config).eval_dir()
    records = read_many(sorted(eval_dir.glob("*_seed*.csv")))
    summaries = summarize(records)
    write_summary_csv(summaries, eval_dir / "summary.csv")
    render_summary_table(summaries, eval_dir / "summary.md", config.config_hash())
    return summaries


def plot_metrics(files: list[Path], out_dir: Path, window: int = 10) -> list[Path]:
    records = read_many(files)
    stages = sorted({r.stage for r in records if r.stage != "eval"})
    figures = [
        plot_training_curves(records, stage, out_dir / f"{stage}_returns.png", window)
        for stage in stages
    ]
    evals = [r for r in records if r.stage == "eval"]
    if evals:
        summaries = summarize(evals)
        figures.append(render_summary_table(summaries, out_dir / "summary.md"))
    return figures
