"""AdamW with decoupled weight decay."""

from __future__ import annotations

import torch
from torch.optim import Optimizer


class AdamW(Optimizer):
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        if lr < 0:
            raise ValueError(f"invalid learning rate {lr}")
        defaults = dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay)
        super().__init__(params, defaults)

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            lr, (beta1, beta2) = group["lr"], group["betas"]
            eps, wd = group["eps"], group["weight_decay"]
            for i, p in enumerate(group["params"]):
                if p.grad is None:
                    continue
                if not torch.isfinite(p.grad).all():
                    name = self.state[p].get("name", f"param[{i}]")
                    raise FloatingPointError(f"non-finite gradient for {name}")
                state = self.state[p]
                if "step" not in state:
                    state["step"] = 0
                    state["m"] = torch.zeros_like(p)
                    state["v"] = torch.zeros_like(p)
                state["step"] += 1
                t = state["step"]
                state["m"].mul_(beta1).add_(p.grad, alpha=1 - beta1)
                state["v"].mul_(beta2).addcmul_(p.grad, p.grad, value=1 - beta2)
                m_hat = state["m"] / (1 - beta1 ** t)
                v_hat = state["v"] / (1 - beta2 ** t)
                # decoupled decay: decay acts on the parameter, not the gradient
                p.add_(m_hat / (v_hat.sqrt() + eps) + wd * p, alpha=-lr)
        return loss

    def set_param_names(self, named_params):
        """Attach names so gradient errors can point at the offending tensor."""
        for name, p in named_params:
            self.state[p]["name"] = name
