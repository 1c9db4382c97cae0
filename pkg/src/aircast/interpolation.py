"""Differentiable kNN interpolation of station predictions at query points.

Neighbours are always selected by geographic (haversine) distance; weighting is
either plain inverse distance or a softmax over latent-feature similarity, so
interpolation error at held-out coordinates can backpropagate into the encoder.
"""

from __future__ import annotations

import numpy as np
import torch

from .geo import knn_query

#: Additive distance offset (meters) preventing division by zero at co-located
#: query points; co-located inputs degrade gracefully to uniform weights.
EPS_METERS = 1.0

MODES = ("inverse_distance", "learned_feature")


def inverse_distance_weights(dist_m: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """Normalized 1/(d + eps) weights for a [M x k] neighbour distance block."""
    w = 1.0 / (torch.as_tensor(dist_m, dtype=dtype) + EPS_METERS)
    return w / w.sum(dim=-1, keepdim=True)


def knn_interpolate(station_preds, coords, query, k: int,
                    mode: str = "inverse_distance", features=None,
                    temperature=None):
    """Interpolate station predictions at query coordinates.

    station_preds: [..., H, N] tensor (numpy or torch), predictions per station
    coords:        [N, 2] (lat, lon) degrees
    query:         [M, 2] degrees
    features:      [..., N, dim] latent station features (learned_feature mode)
    temperature:   positive scalar tensor, softmax temperature (learned_feature)

    Returns [..., H, M] with weights that are non-negative and sum to one, so
    every value is a convex combination of the k neighbours' predictions.
    """
    if mode not in MODES:
        raise ValueError(f"unknown interpolation mode {mode!r}")
    query = np.atleast_2d(np.asarray(query, dtype=np.float64))
    if not np.isfinite(query).all():
        raise ValueError("query coordinates must be finite")
    as_numpy = not torch.is_tensor(station_preds)
    preds = torch.as_tensor(station_preds)
    if preds.dtype not in (torch.float32, torch.float64):
        preds = preds.to(torch.float32)

    idx, dist = knn_query(coords, query, k)              # [M, k]
    idx_t = torch.as_tensor(idx, dtype=torch.long)
    base_w = inverse_distance_weights(dist, dtype=preds.dtype)   # [M, k]

    if mode == "inverse_distance":
        weights = base_w                                  # [M, k]
    else:
        if features is None:
            raise ValueError("learned_feature mode requires station features")
        feats = features if torch.is_tensor(features) else torch.as_tensor(features, dtype=preds.dtype)
        tau = temperature if temperature is not None else torch.tensor(1.0, dtype=preds.dtype)
        neigh = feats[..., idx_t, :]                      # [..., M, k, dim]
        blend = (base_w.unsqueeze(-1) * neigh).sum(dim=-2, keepdim=True)  # [..., M, 1, dim]
        score = -((blend - neigh) ** 2).sum(dim=-1) / tau.clamp_min(1e-6)
        weights = torch.softmax(score, dim=-1)            # [..., M, k]

    neigh_preds = preds[..., idx_t]                       # [..., H, M, k]
    if weights.dim() > 2:                                 # batched feature weights
        weights = weights.unsqueeze(-3)                   # [..., 1, M, k]
    out = (neigh_preds * weights).sum(dim=-1)             # [..., H, M]
    return out.numpy() if as_numpy else out
