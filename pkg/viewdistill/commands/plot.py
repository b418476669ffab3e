"""plot: training curves and the summary table from metrics CSV files."""

import argparse
import logging
from pathlib import Path

from viewdistill.commands import add_common_arguments, load_run_config
from viewdistill.services.runner import RunPaths, plot_metrics

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("plot", help="plot metrics files")
    add_common_arguments(parser)
    parser.add_argument("metrics", nargs="*", type=Path, help="CSV files (default: whole run)")
    parser.add_argument("--window", type=int, help="moving-average width in episodes")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    paths = RunPaths(config)
    files = args.metrics or sorted(paths.root.rglob("*.csv"))
    files = [f for f in files if f.name not in ("summary.csv",)]
    window = args.window or config.evaluation.smoothing_window
    for figure in plot_metrics(files, paths.figures_dir(), window):
        logger.info(f"Wrote {figure}")
    return 0
