"""Metrics CSV stream - frozen column schema, one serialized writer per file."""

import csv
import logging
import threading
from pathlib import Path
from typing import Callable, Iterable

from viewdistill.core.exceptions import EmptyInputError
from viewdistill.schemas.metrics import CSV_COLUMNS, MetricsRecord

logger = logging.getLogger(__name__)


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class MetricsWriter:
    """Append-only writer. The header is written once, when the file is created."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with self.path.open("w", newline="", encoding="utf-8") as f:
                csv.writer(f, lineterminator="\n").writerow(CSV_COLUMNS)

    def append(self, record: MetricsRecord) -> None:
        self.extend([record])

    def extend(self, records: Iterable[MetricsRecord]) -> None:
        rows = [[_cell(getattr(r, c)) for c in CSV_COLUMNS] for r in records]
        with self._lock, self.path.open("a", newline="", encoding="utf-8") as f:
            csv.writer(f, lineterminator="\n").writerows(rows)

    def truncate(self, keep: Callable[[MetricsRecord], bool]) -> int:
        """Rewrite the file with only the rows `keep` accepts. Returns the number dropped."""
        with self._lock:
            records = read_metrics(self.path, allow_empty=True)
            kept = [r for r in records if keep(r)]
            with self.path.open("w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                writer.writerows([[_cell(getattr(r, c)) for c in CSV_COLUMNS] for r in kept])
        dropped = len(records) - len(kept)
        if dropped:
            logger.warning(f"Dropped {dropped} metrics rows past the resume point in {self.path}")
        return dropped


def read_metrics(path: Path, allow_empty: bool = False) -> list[MetricsRecord]:
    path = Path(path)
    if not path.exists():
        if allow_empty:
            return []
        raise EmptyInputError(f"metrics file {path} does not exist")
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        records = [
            MetricsRecord.model_validate({k: (v if v != "" else None) for k, v in row.items()})
            for row in reader
        ]
    if not records and not allow_empty:
        raise EmptyInputError(f"metrics file {path} has no rows")
    return records


def read_many(paths: Iterable[Path]) -> list[MetricsRecord]:
    records: list[MetricsRecord] = []
    for path in paths:
        records.extend(read_metrics(path, allow_empty=True))
    if not records:
        raise EmptyInputError("no metrics rows in the given files")
    return records
