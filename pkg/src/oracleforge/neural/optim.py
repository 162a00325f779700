"""AdamW with decoupled weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch


class NonFinite(FloatingPointError):
    pass


@dataclass(frozen=True)
class AdamWHyper:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class AdamWState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


@torch.no_grad()
def adamw_step(params, grads, state: AdamWState, hyper: AdamWHyper) -> AdamWState:
    """One in-place update of ``params``.

    p <- p - lr*wd*p - lr * m_hat / (sqrt(v_hat) + eps); decay never touches
    the moment estimates.
    """
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    if not state.m:
        state.m = [torch.zeros_like(p) for p in params]
        state.v = [torch.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    c1 = 1.0 - hyper.beta1 ** t
    c2 = 1.0 - hyper.beta2 ** t
    updates = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = torch.zeros_like(p)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {tuple(g.shape)} != parameter shape {tuple(p.shape)}")
        m.mul_(hyper.beta1).add_(g, alpha=1.0 - hyper.beta1)
        v.mul_(hyper.beta2).addcmul_(g, g, value=1.0 - hyper.beta2)
        step = hyper.lr * (m / c1) / ((v / c2).sqrt() + hyper.eps)
        new = p - hyper.lr * hyper.weight_decay * p - step
        if not bool(torch.isfinite(new).all()):
            raise NonFinite(f"non-finite parameter update at step {t}")
        updates.append(new)
    for p, new in zip(params, updates):
        p.copy_(new)
    return state


class AdamW:
    """Stateful wrapper over :func:`adamw_step` for a fixed parameter list."""

    def __init__(self, params, lr: float, weight_decay: float = 0.01, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = [p for p in params if p.requires_grad]
        self.hyper = AdamWHyper(lr, betas[0], betas[1], eps, weight_decay)
        self.state = AdamWState()

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        adamw_step(self.params, [p.grad for p in self.params], self.state, self.hyper)
