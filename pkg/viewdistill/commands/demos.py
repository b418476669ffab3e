"""gen-demos: scripted-expert demonstrations for the teacher's replay buffer."""

import argparse
import logging
from functools import partial

from viewdistill.commands import add_common_arguments, load_run_config
from viewdistill.services.runner import fan_out, gen_demos

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("gen-demos", help="write scripted-expert demo buffers")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    paths = fan_out(partial(gen_demos, config), config.seeds)
    for path in paths:
        logger.info(f"Demo buffer: {path}")
    return 0
