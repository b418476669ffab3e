"""Command-line entry point."""

import argparse
import logging
import sys

from pydantic import ValidationError

from viewdistill.commands import control, demos, distill, evaluate, plot, teacher
from viewdistill.config import get_settings
from viewdistill.core.exceptions import TrainingDivergedError, ViewDistillError

LOG_FORMAT = "%(asctime)s %(process)d %(levelname)s %(name)s: %(message)s"

logger = logging.getLogger("viewdistill")


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, stream=sys.stderr, force=True)


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="viewdistill",
        description="Multi-view teacher to single-view student policy distillation",
    )
    parser.add_argument("--log-level", default=settings.log_level)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in (demos, teacher, distill, evaluate, plot, control):
        module.register(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except TrainingDivergedError as exc:
        logger.error(f"{exc.detail}; last good parameters: {exc.checkpoint}")
        return 2
    except ViewDistillError as exc:
        logger.error(exc.detail)
        return 2
    except ValidationError as exc:
        logger.error(f"Invalid configuration:\n{exc}")
        return 2
    except Exception:
        logger.exception(f"{args.command} failed")
        return 1


if __name__ == "__main__":
    sys.exit(main())
