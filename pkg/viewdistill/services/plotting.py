"""Training curves and the evaluation summary table."""

import csv
import logging
from collections import defaultdict
from pathlib import Path
from typing import NamedTuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from jinja2 import Environment, PackageLoader  # noqa: E402

from viewdistill.core.exceptions import EmptyInputError  # noqa: E402
from viewdistill.schemas.metrics import (  # noqa: E402
    SUMMARY_COLUMNS,
    EvalSummary,
    MetricsRecord,
    Stage,
)

logger = logging.getLogger(__name__)

templates = Environment(loader=PackageLoader("viewdistill", "templates"), autoescape=False)


class Band(NamedTuple):
    mean: np.ndarray
    low: np.ndarray
    high: np.ndarray


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over `window` points; the first points average what is available."""
    values = np.asarray(values, dtype=np.float64)
    if window <= 1 or values.size == 0:
        return values.copy()
    cumsum = np.cumsum(np.insert(values, 0, 0.0))
    idx = np.arange(1, values.size + 1)
    start = np.maximum(idx - window, 0)
    return (cumsum[idx] - cumsum[start]) / (idx - start)


def seed_band(streams: list[np.ndarray], window: int = 1) -> Band:
    """Mean line and min/max band across seeds, each stream smoothed first."""
    if not streams or any(len(s) == 0 for s in streams):
        raise EmptyInputError("need at least one non-empty metric stream")
    length = min(len(s) for s in streams)
    stacked = np.stack([moving_average(s, window)[:length] for s in streams])
    return Band(stacked.mean(axis=0), stacked.min(axis=0), stacked.max(axis=0))


def return_streams(records: list[MetricsRecord], stage: Stage) -> dict[str, list[np.ndarray]]:
    """Per policy, one episode-ordered return array per seed."""
    grouped: dict[str, dict[int, list[MetricsRecord]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        if r.stage == stage:
            grouped[r.policy][r.seed].append(r)
    return {
        policy: [
            np.array([r.episode_return for r in sorted(rows, key=lambda r: r.episode)])
            for _, rows in sorted(by_seed.items())
        ]
        for policy, by_seed in sorted(grouped.items())
    }


def plot_training_curves(
    records: list[MetricsRecord], stage: Stage, path: Path, window: int = 10
) -> Path:
    streams = return_streams(records, stage)
    if not streams:
        raise EmptyInputError(f"no '{stage}' rows to plot")
    fig, ax = plt.subplots(figsize=(7, 4))
    for policy, per_seed in streams.items():
        band = seed_band(per_seed, window)
        x = np.arange(len(band.mean))
        (line,) = ax.plot(x, band.mean, label=f"{policy} ({len(per_seed)} seeds)")
        ax.fill_between(x, band.low, band.high, color=line.get_color(), alpha=0.2)
    ax.set_xlabel("episode")
    ax.set_ylabel("return")
    ax.set_title(f"{stage} returns")
    ax.legend(loc="lower right")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def _cell(summary: EvalSummary | None, field: str) -> str:
    if summary is None:
        return "-"
    if field == "success":
        return f"{100 * summary.success_mean:.1f} ± {100 * summary.success_std:.1f}"
    return f"{summary.return_mean:.1f} ± {summary.return_std:.1f}"


def render_summary_table(
    summaries: list[EvalSummary], path: Path, config_hash: str | None = None
) -> Path:
    """Markdown table: one row per (policy, task), fixed and random columns side by side."""
    if not summaries:
        raise EmptyInputError("no evaluation summaries to tabulate")
    by_key: dict[tuple[str, str], dict[str, EvalSummary]] = defaultdict(dict)
    for s in summaries:
        by_key[(s.policy, s.task)][s.view_mode] = s
    rows = [
        {
            "policy": policy,
            "task": task,
            "fixed_return": _cell(modes.get("fixed"), "return"),
            "fixed_success": _cell(modes.get("fixed"), "success"),
            "random_return": _cell(modes.get("random"), "return"),
            "random_success": _cell(modes.get("random"), "success"),
        }
        for (policy, task), modes in sorted(by_key.items())
    ]
    trials = max(s.trials // max(s.seeds, 1) for s in summaries)
    text = templates.get_template("summary_table.md.j2").render(
        title="Evaluation summary", rows=rows, trials=trials, config_hash=config_hash
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_summary_csv(summaries: list[EvalSummary], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            writer.writerow([getattr(s, c) for c in SUMMARY_COLUMNS])
    return path
