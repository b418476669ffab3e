"""Exception hierarchy shared by every module."""

from pathlib import Path


class ViewDistillError(Exception):
    """Base error. `detail` is the message shown to the CLI user."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class GeometryError(ViewDistillError):
    """Degenerate camera pose or illegal intrinsics."""


class ShapeError(ViewDistillError):
    """Tensor, image or view-count shape mismatch."""


class DegenerateFeatureError(ViewDistillError):
    """A feature row has (near) zero norm, so its cosine similarity is undefined."""


class InstrumentationError(ViewDistillError):
    """Gradient verification hit a non-finite value."""


class ArchiveIntegrityError(ViewDistillError):
    """A parameter archive or replay spill file is truncated or corrupt."""


class FingerprintError(ViewDistillError):
    """Parameters do not belong to the expected architecture."""


class EpisodeFinishedError(ViewDistillError):
    """`step` was called on an episode that already reached its horizon."""


class DependencyError(ViewDistillError):
    """A pipeline stage is missing an artifact produced by an earlier stage."""


class EmptyInputError(ViewDistillError):
    """Nothing to aggregate."""


class TrainingDivergedError(ViewDistillError):
    """A loss became non-finite. `checkpoint` points at the last good parameters."""

    def __init__(self, detail: str, checkpoint: Path | None = None):
        super().__init__(detail)
        self.checkpoint = checkpoint
