"""distill: single-view student from a trained teacher."""

import argparse
import logging
from functools import partial

from viewdistill.commands import add_common_arguments, load_run_config
from viewdistill.services.runner import distill_seed, fan_out

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("distill", help="distill a teacher into a single-view student")
    add_common_arguments(parser)
    parser.add_argument("--resume", action="store_true", help="continue from the last checkpoint")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    logger.info(
        f"Distilling t{config.teacher_views}cam on {config.task} "
        f"with feature loss '{config.distill.feature_loss}', seeds {config.seeds}"
    )
    paths = fan_out(partial(distill_seed, config, resume=args.resume), config.seeds)
    for path in paths:
        logger.info(f"Student parameters: {path}")
    return 0
