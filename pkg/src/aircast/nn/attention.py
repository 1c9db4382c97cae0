"""Multi-head self-attention over the time axis with a residual connection."""

from __future__ import annotations

import math

import torch
import torch.nn as nn


class MultiHeadSelfAttention(nn.Module):
    """softmax(Q K^T / sqrt(d_k)) V, heads concatenated and projected, plus the
    residual input. No causal mask: reanalysis attends over the full window.

    The output projection carries no bias, so a zero value projection makes the
    layer an exact identity map.
    """

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads != 0:
            raise ValueError(f"d_model={d_model} not divisible by n_heads={n_heads}")
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_k = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model, bias=False)
        self.reset_parameters()

    def reset_parameters(self):
        bound = 1.0 / math.sqrt(self.d_model)
        with torch.no_grad():
            for lin in (self.q_proj, self.k_proj, self.v_proj, self.out_proj):
                lin.weight.uniform_(-bound, bound)
                if lin.bias is not None:
                    lin.bias.zero_()

    def _split_heads(self, x: torch.Tensor) -> torch.Tensor:
        # [T, B, d_model] -> [B, heads, T, d_k]
        t, b, _ = x.shape
        return x.view(t, b, self.n_heads, self.d_k).permute(1, 2, 0, 3)

    def attention_weights(self, z: torch.Tensor) -> torch.Tensor:
        """Row-stochastic attention matrices [B, heads, T, T] for input [T, B, d]."""
        if z.dim() != 3 or z.shape[-1] != self.d_model:
            raise ValueError(f"expected [T, B, {self.d_model}], got {tuple(z.shape)}")
        q = self._split_heads(self.q_proj(z))
        k = self._split_heads(self.k_proj(z))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_k)
        # max-subtraction for a numerically stable softmax
        scores = scores - scores.max(dim=-1, keepdim=True).values
        return torch.softmax(scores, dim=-1)

    def forward(self, z: torch.Tensor, return_weights: bool = False):
        weights = self.attention_weights(z)                      # [B, h, T, T]
        v = self._split_heads(self.v_proj(z))                    # [B, h, T, d_k]
        mixed = weights @ v                                      # [B, h, T, d_k]
        t, b, _ = z.shape
        mixed = mixed.permute(2, 0, 1, 3).reshape(t, b, self.d_model)
        out = self.out_proj(mixed) + z
        return (out, weights) if return_weights else out
