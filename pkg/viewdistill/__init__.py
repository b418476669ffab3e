"""Multi-view to single-view visual policy distillation."""

__version__ = "0.1.0"
