"""train-teacher: SAC on the fixed multi-view rig, one process per seed."""

import argparse
import logging
from functools import partial

from viewdistill.commands import add_common_arguments, load_run_config
from viewdistill.services.runner import fan_out, train_teacher_seed

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train-teacher", help="train the multi-view SAC teacher")
    add_common_arguments(parser)
    parser.add_argument("--resume", action="store_true", help="continue from the last checkpoint")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    logger.info(
        f"Training {config.teacher_views}-view teacher on {config.task}, seeds {config.seeds}"
    )
    paths = fan_out(partial(train_teacher_seed, config, resume=args.resume), config.seeds)
    for path in paths:
        logger.info(f"Teacher parameters: {path}")
    return 0
