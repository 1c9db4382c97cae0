"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np
import torch


def finite_difference_check(loss_fn, params, n_samples: int = 50, h: float = 1e-5,
                            rel_tol: float = 1e-4, rng=None) -> float:
    """Compare autograd gradients of ``loss_fn()`` against central differences.

    Samples ``n_samples`` random scalar entries across ``params`` (64-bit
    tensors expected), perturbs each by +/- h and checks the relative error of
    the analytic gradient. Returns the worst relative error; raises
    AssertionError beyond ``rel_tol``.
    """
    rng = rng or np.random.default_rng(0)
    params = [p for p in params if p.requires_grad]
    for p in params:
        if p.dtype != torch.float64:
            raise ValueError("gradient checking requires float64 parameters")

    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)

    sizes = np.array([p.numel() for p in params])
    total = sizes.sum()
    picks = rng.choice(total, size=min(n_samples, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    for flat in picks:
        pi = int(np.searchsorted(offsets, flat, side="right") - 1)
        j = int(flat - offsets[pi])
        p = params[pi]
        analytic = 0.0 if grads[pi] is None else float(grads[pi].view(-1)[j])
        with torch.no_grad():
            orig = float(p.view(-1)[j])
            p.view(-1)[j] = orig + h
            up = float(loss_fn())
            p.view(-1)[j] = orig - h
            down = float(loss_fn())
            p.view(-1)[j] = orig
        numeric = (up - down) / (2 * h)
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, err)
        if err > rel_tol:
            raise AssertionError(
                f"gradient mismatch at param {pi} index {j}: "
                f"analytic {analytic:.6e}, numeric {numeric:.6e}, rel err {err:.3e}")
    return worst
