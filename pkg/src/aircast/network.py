"""Model assembly: shared per-station LSTM-attention encoder, temporal pooling,
a dense forecasting head, and kNN interpolation at arbitrary coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field

import numpy as np
import torch
import torch.nn as nn

from .interpolation import knn_interpolate, MODES
from .stations import POLLUTANTS
from .temporal import N_TIME_FEATURES
from .windows import WindowBatch


@dataclass
class ModelConfig:
    hidden_dim: int = 64
    n_heads: int = 4
    t_in: int = 24
    horizon: int = 6
    k_neighbors: int = 20
    knn_weight_mode: str = "inverse_distance"
    use_time_features: bool = True
    n_pollutants: int = len(POLLUTANTS)

    def validate(self) -> "ModelConfig":
        if self.hidden_dim % self.n_heads != 0:
            raise ValueError(f"hidden_dim={self.hidden_dim} not divisible by "
                             f"n_heads={self.n_heads}")
        if self.k_neighbors < 1 or self.horizon < 1 or self.t_in < 1:
            raise ValueError("k_neighbors, horizon and t_in must be >= 1")
        if self.knn_weight_mode not in MODES:
            raise ValueError(f"unknown knn_weight_mode {self.knn_weight_mode!r}")
        return self

    @property
    def input_channels(self) -> int:
        return self.n_pollutants + (N_TIME_FEATURES if self.use_time_features else 0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d).validate()


class ReanalysisModel(nn.Module):
    """Hourly PM2.5 reanalysis over a station network.

    Each station's window (pollutant channels plus broadcast cyclic time
    features) runs through a shared LSTM, multi-head self-attention with a
    residual, mean pooling over time, and an affine head mapping the pooled
    feature to the forecast horizon. Spatial estimates at arbitrary
    coordinates come from differentiable kNN interpolation of the per-station
    outputs.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        from .nn import LSTM, MultiHeadSelfAttention
        self.config = config.validate()
        self.lstm = LSTM(config.input_channels, config.hidden_dim)
        self.attention = MultiHeadSelfAttention(config.hidden_dim, config.n_heads)
        self.head = nn.Linear(config.hidden_dim, config.horizon)
        # softmax temperature for feature-similarity interpolation weights
        self.log_tau = nn.Parameter(torch.zeros(()))
        self.reset_parameters()

    def reset_parameters(self):
        self.lstm.reset_parameters()
        self.attention.reset_parameters()
        bound = 1.0 / math.sqrt(self.config.hidden_dim)
        with torch.no_grad():
            self.head.weight.uniform_(-bound, bound)
            self.head.bias.zero_()
            self.log_tau.zero_()

    def _stack_inputs(self, inputs: torch.Tensor, time_feats: torch.Tensor) -> torch.Tensor:
        b, c, t, n = inputs.shape
        if self.config.use_time_features:
            tf = time_feats.unsqueeze(-1).expand(b, time_feats.shape[1], t, n)
            inputs = torch.cat([inputs, tf], dim=1)
        if inputs.shape[1] != self.config.input_channels:
            raise ValueError(f"expected {self.config.input_channels} input channels, "
                             f"got {inputs.shape[1]}")
        # [B, C', T, N] -> [T, B*N, C'] so stations share the encoder
        return inputs.permute(2, 0, 3, 1).reshape(t, b * n, -1)

    def encode(self, inputs: torch.Tensor, time_feats: torch.Tensor,
               return_attention: bool = False):
        """Pooled per-station features [B, N, hidden_dim]."""
        b, _, t, n = inputs.shape
        z = self.lstm(self._stack_inputs(inputs, time_feats))
        if return_attention:
            z2, weights = self.attention(z, return_weights=True)
            weights = weights.view(b, n, self.config.n_heads, t, t)
        else:
            z2 = self.attention(z)
        pooled = z2.mean(dim=0).view(b, n, self.config.hidden_dim)
        return (pooled, weights) if return_attention else pooled

    def predict_visible(self, inputs, time_feats):
        """Horizon predictions [B, H, N] in normalized units."""
        pooled = self.encode(inputs, time_feats)
        return self.head(pooled).permute(0, 2, 1), pooled

    def predict_at(self, inputs, time_feats, station_coords, query_coords,
                   k: int | None = None):
        """Predictions interpolated at arbitrary coordinates: [B, H, M]."""
        if not np.isfinite(np.asarray(query_coords, dtype=np.float64)).all():
            raise ValueError("query coordinates must be finite")
        preds, pooled = self.predict_visible(inputs, time_feats)
        k = k or self.config.k_neighbors
        k = min(k, len(station_coords))
        return knn_interpolate(
            preds, station_coords, query_coords, k,
            mode=self.config.knn_weight_mode, features=pooled,
            temperature=self.log_tau.exp())

    def forward(self, batch: WindowBatch, device=None, dtype=torch.float32):
        """Convenience: run a WindowBatch, returning visible preds and features."""
        inputs = torch.as_tensor(batch.inputs, dtype=dtype, device=device)
        tf = torch.as_tensor(batch.time_feats, dtype=dtype, device=device)
        return self.predict_visible(inputs, tf)
