"""Cyclic encoding of periodic time indices."""

from __future__ import annotations

import numpy as np
import pandas as pd

#: (cycle length, extractor) for the three encoded periodicities.
CYCLES = {"hour": 24, "day_of_week": 7, "month": 12}

#: Number of time-feature channels produced by time_features().
N_TIME_FEATURES = 2 * len(CYCLES)


def cyclic_encode(t, cycle: int):
    """Map a periodic index onto the unit circle: (sin, cos) of 2*pi*t/cycle.

    Adjacent indices across the period boundary (23:00 vs 00:00) stay adjacent
    in this representation, unlike the raw index.
    """
    if cycle < 1:
        raise ValueError(f"cycle must be a positive integer, got {cycle}")
    angle = 2.0 * np.pi * np.asarray(t, dtype=np.float64) / cycle
    return np.sin(angle), np.cos(angle)


def time_features(timestamps: pd.DatetimeIndex) -> np.ndarray:
    """Encode timestamps as a [6 x T] matrix: sin/cos of hour, day-of-week, month.

    Month is encoded 0-based so January maps to angle zero, matching the other
    two zero-based indices.
    """
    feats = []
    for name, cycle in CYCLES.items():
        if name == "hour":
            idx = timestamps.hour
        elif name == "day_of_week":
            idx = timestamps.dayofweek
        else:
            idx = timestamps.month - 1
        s, c = cyclic_encode(np.asarray(idx), cycle)
        feats.extend([s, c])
    return np.stack(feats, axis=0)
