"""Central finite-difference check of autograd gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import torch


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    max_abs_error: float
    n_checked: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def grad_check(fn: Callable[[], torch.Tensor], inputs: Sequence[torch.Tensor], h: float = 1e-5,
               tol: float = 1e-4, max_entries: int | None = None, floor: float = 1e-6,
               generator: torch.Generator | None = None) -> GradCheckReport:
    """Compare d fn / d inputs from autograd against (f(x+h) - f(x-h)) / 2h.

    Per entry the relative error is |a - n| / max(|a|, |n|, floor). With
    ``max_entries`` a random subset of each tensor's entries is probed.
    """
    inputs = list(inputs)
    for x in inputs:
        x.grad = None
    fn().backward()
    analytic = [x.grad.detach().clone() if x.grad is not None else torch.zeros_like(x) for x in inputs]
    worst_rel = worst_abs = 0.0
    count = 0
    with torch.no_grad():
        for x, a in zip(inputs, analytic):
            flat = x.view(-1)
            idx = range(flat.numel())
            if max_entries is not None and flat.numel() > max_entries:
                idx = torch.randperm(flat.numel(), generator=generator)[:max_entries].tolist()
            for i in idx:
                orig = flat[i].item()
                flat[i] = orig + h
                f_plus = fn().item()
                flat[i] = orig - h
                f_minus = fn().item()
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2 * h)
                ana = a.view(-1)[i].item()
                err = abs(ana - numeric)
                worst_abs = max(worst_abs, err)
                worst_rel = max(worst_rel, err / max(abs(ana), abs(numeric), floor))
                count += 1
    return GradCheckReport(worst_rel, worst_abs, count, tol)
