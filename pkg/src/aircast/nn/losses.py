"""Loss functions."""

from __future__ import annotations

import torch


def masked_mse(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean squared error over entries selected by a boolean mask."""
    if pred.shape != target.shape or pred.shape != mask.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)}, "
                         f"target {tuple(target.shape)}, mask {tuple(mask.shape)}")
    mask = mask.bool()
    n = mask.sum()
    if n == 0:
        raise ValueError("mask selects no elements")
    diff = (pred - target) * mask
    return (diff ** 2).sum() / n
