"""evaluate: success rate and return under the fixed or a random viewpoint."""

import argparse
import logging

from viewdistill.commands import add_common_arguments, load_run_config
from viewdistill.services.runner import run_evaluation

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("evaluate", help="evaluate a trained policy")
    add_common_arguments(parser)
    parser.add_argument(
        "--policy",
        choices=["teacher", "student", "control", "expert", "random"],
        default="student",
    )
    parser.add_argument("--view-mode", choices=["fixed", "random"], default="fixed")
    parser.add_argument("--trials", type=int, help="trials per seed (default from config)")
    parser.add_argument("--dump-frames", type=int, default=0, help="PPM frames of trial 0")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    summaries = run_evaluation(
        config, args.policy, args.view_mode, trials=args.trials, dump_frames=args.dump_frames
    )
    for s in summaries:
        logger.info(
            f"{s.policy} {s.task} {s.view_mode}: "
            f"success {100 * s.success_mean:.1f} ± {100 * s.success_std:.1f}%, "
            f"return {s.return_mean:.1f} ± {s.return_std:.1f} ({s.seeds} seeds)"
        )
    return 0
