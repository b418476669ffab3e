"""negative-control: single-view SAC under full camera randomization, no distillation."""

import argparse
import logging
from functools import partial

from viewdistill.commands import add_common_arguments, load_run_config
from viewdistill.services.runner import fan_out, negative_control_seed

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "negative-control", help="train a randomized-camera single-view agent without KD"
    )
    add_common_arguments(parser)
    parser.add_argument("--resume", action="store_true", help="continue from the last checkpoint")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    paths = fan_out(partial(negative_control_seed, config, resume=args.resume), config.seeds)
    for path in paths:
        logger.info(f"Control parameters: {path}")
    return 0
