"""CLI verbs. Each module exposes `register(subparsers)`; shared flags live here."""

import argparse
from pathlib import Path

from viewdistill.config import get_settings
from viewdistill.schemas.run import RunConfig

FEATURE_LOSS_FLAGS = {"mse": "mse", "sim": "pairwise_similarity", "none": "none"}


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="run config JSON (default from settings)")
    parser.add_argument("--seed", type=int, help="run only this seed instead of the config's")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--task", choices=["cube", "mug"])
    parser.add_argument("--views", type=int, choices=[1, 2, 3], help="teacher camera views")
    parser.add_argument("--feature-loss", choices=sorted(FEATURE_LOSS_FLAGS))
    parser.add_argument("--with-state", action="store_true", help="append joint state q")


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file plus command-line overrides."""
    path = args.config or get_settings().default_config
    config = RunConfig.load(path)
    config = config.with_overrides(
        task=args.task,
        teacher_views=args.views,
        output_dir=args.out,
        seeds=[args.seed] if args.seed is not None else None,
        with_state=True if args.with_state else None,
    )
    feature_loss = getattr(args, "feature_loss", None)
    return config.with_feature_loss(FEATURE_LOSS_FLAGS[feature_loss] if feature_loss else None)
