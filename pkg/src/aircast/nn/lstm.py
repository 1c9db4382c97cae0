"""Single-layer LSTM with explicit gate equations."""

from __future__ import annotations

import math

import torch
import torch.nn as nn


class LSTM(nn.Module):
    """Standard LSTM (sigmoid input/forget/output gates, tanh cell).

    Input [T, B, input_dim] -> output [T, B, hidden_dim]. The hidden state is
    o * tanh(c), so outputs are bounded in (-1, 1). With all parameters at
    zero the output is exactly zero for any input.
    """

    def __init__(self, input_dim: int, hidden_dim: int):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        # gate order along the stacked axis: input, forget, cell, output
        self.w_ih = nn.Parameter(torch.empty(4 * hidden_dim, input_dim))
        self.w_hh = nn.Parameter(torch.empty(4 * hidden_dim, hidden_dim))
        self.b = nn.Parameter(torch.zeros(4 * hidden_dim))
        self.reset_parameters()

    def reset_parameters(self):
        bound_ih = 1.0 / math.sqrt(self.input_dim)
        bound_hh = 1.0 / math.sqrt(self.hidden_dim)
        with torch.no_grad():
            self.w_ih.uniform_(-bound_ih, bound_ih)
            self.w_hh.uniform_(-bound_hh, bound_hh)
            self.b.zero_()
            # forget-gate bias +1 stabilizes early training
            self.b[self.hidden_dim:2 * self.hidden_dim] = 1.0

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 3 or x.shape[-1] != self.input_dim:
            raise ValueError(f"expected [T, B, {self.input_dim}], got {tuple(x.shape)}")
        t_len, batch, _ = x.shape
        h = x.new_zeros(batch, self.hidden_dim)
        c = x.new_zeros(batch, self.hidden_dim)
        gates_x = x @ self.w_ih.T + self.b  # [T, B, 4*hidden]
        outputs = []
        for t in range(t_len):
            gates = gates_x[t] + h @ self.w_hh.T
            i, f, g, o = gates.chunk(4, dim=-1)
            i, f, o = torch.sigmoid(i), torch.sigmoid(f), torch.sigmoid(o)
            c = f * c + i * torch.tanh(g)
            h = o * torch.tanh(c)
            outputs.append(h)
        return torch.stack(outputs)

    def step(self, x_t, h, c):
        """One cell step; exposed for direct verification against the recurrences."""
        gates = x_t @ self.w_ih.T + self.b + h @ self.w_hh.T
        i, f, g, o = gates.chunk(4, dim=-1)
        c_new = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h_new = torch.sigmoid(o) * torch.tanh(c_new)
        return h_new, c_new
