"""Finite-difference verification of autograd gradients."""

import logging
from typing import Callable, Mapping

import torch
from pydantic import BaseModel

from viewdistill.core.exceptions import InstrumentationError

logger = logging.getLogger(__name__)


class GradEntry(BaseModel):
    tensor: str
    index: int
    analytic: float
    numeric: float
    relative_error: float


class GradCheckReport(BaseModel):
    passed: bool
    tolerance: float
    max_relative_error: float
    entries: list[GradEntry]

    def worst(self) -> GradEntry | None:
        return max(self.entries, key=lambda p: p.relative_error, default=None)


def _require_finite(value: torch.Tensor, what: str) -> None:
    if not bool(torch.isfinite(value).all()):
        raise InstrumentationError(f"non-finite {what}")


def grad_check(
    fn: Callable[[], torch.Tensor],
    params: Mapping[str, torch.Tensor],
    tolerance: float = 1e-3,
    step: float = 1e-4,
    max_entries: int = 64,
    generator: torch.Generator | None = None,
    floor: float = 1e-2,
) -> GradCheckReport:
    """Compare autograd gradients of scalar `fn()` to central differences.

    Up to `max_entries` scalar entries are drawn uniformly from all of `params`. The relative
    error of an entry is |analytic - numeric| / max(|numeric|, floor); the check passes when
    every entry is below `tolerance`. With the default `floor` of 1e-2, entries whose numeric
    gradient is smaller than the floor are held to an absolute error of `tolerance * floor`
    instead of a relative one; lower `floor` for a stricter test. Run in float64 for tight
    tolerances.
    """
    names = list(params)
    tensors = [params[n] for n in names]
    loss = fn()
    if loss.dim() != 0:
        raise InstrumentationError(f"grad_check needs a scalar function, got {tuple(loss.shape)}")
    _require_finite(loss.detach(), "function value at the unperturbed parameters")
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    grads = [torch.zeros_like(t) if g is None else g for t, g in zip(tensors, grads)]
    for name, g in zip(names, grads):
        _require_finite(g, f"analytic gradient for tensor '{name}'")

    sizes = [t.numel() for t in tensors]
    total = sum(sizes)
    picks = torch.randperm(total, generator=generator)[: min(max_entries, total)]
    offsets = torch.tensor([0] + sizes).cumsum(0)

    entries: list[GradEntry] = []
    with torch.no_grad():
        for flat in sorted(int(i) for i in picks):
            k = int(torch.searchsorted(offsets, flat, right=True)) - 1
            local = flat - int(offsets[k])
            view = tensors[k].view(-1)
            original = view[local].item()
            view[local] = original + step
            plus = fn()
            view[local] = original - step
            minus = fn()
            view[local] = original
            where = f"function value after perturbing '{names[k]}'[{local}]"
            _require_finite(plus, where)
            _require_finite(minus, where)
            numeric = (plus - minus).item() / (2.0 * step)
            analytic = grads[k].reshape(-1)[local].item()
            error = abs(analytic - numeric) / max(abs(numeric), floor)
            entries.append(
                GradEntry(
                    tensor=names[k],
                    index=local,
                    analytic=analytic,
                    numeric=numeric,
                    relative_error=error,
                )
            )

    worst = max((p.relative_error for p in entries), default=0.0)
    report = GradCheckReport(
        passed=worst < tolerance, tolerance=tolerance, max_relative_error=worst, entries=entries
    )
    if not report.passed:
        bad = report.worst()
        logger.warning(
            f"Gradient check failed on {bad.tensor}[{bad.index}]: "
            f"analytic={bad.analytic:.6g} numeric={bad.numeric:.6g}"
        )
    return report
