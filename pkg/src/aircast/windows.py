"""Sliding-window construction for training and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .stations import DataError, NormalizationSpec, StationSeries, PM25
from .temporal import time_features


@dataclass
class WindowBatch:
    """A stack of aligned input/target windows.

    inputs:        [B, C, T_in, N] normalized pollutant channels, visible stations
    time_feats:    [B, 6, T_in] cyclic hour/day-of-week/month features
    targets:       [B, H, N_target] normalized PM2.5 for all stations (visible + hidden)
    target_mask:   [B, H, N_target] True where the target observation is valid
    """

    inputs: np.ndarray
    time_feats: np.ndarray
    targets: np.ndarray
    target_mask: np.ndarray
    station_coords: np.ndarray       # [N, 2] (lat, lon) of visible stations
    target_coords: np.ndarray        # [N_target, 2]
    station_ids: list = field(default_factory=list)
    target_ids: list = field(default_factory=list)
    hidden_idx: np.ndarray = None    # indices into targets of hidden stations
    visible_idx: np.ndarray = None   # indices into targets of visible stations

    def __post_init__(self):
        b, _, t, n = self.inputs.shape
        if self.time_feats.shape != (b, 6, t):
            raise DataError(f"time feature shape {self.time_feats.shape} inconsistent with inputs")
        if self.targets.shape != self.target_mask.shape or self.targets.shape[0] != b:
            raise DataError("target/mask shape mismatch")
        if self.station_coords.shape != (n, 2):
            raise DataError("station_coords shape mismatch")
        if self.target_coords.shape != (self.targets.shape[2], 2):
            raise DataError("target_coords shape mismatch")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def select(self, idx) -> "WindowBatch":
        """Row-subset along the window axis (shares coordinate metadata)."""
        idx = np.asarray(idx)
        return WindowBatch(self.inputs[idx], self.time_feats[idx], self.targets[idx],
                           self.target_mask[idx], self.station_coords, self.target_coords,
                           self.station_ids, self.target_ids, self.hidden_idx, self.visible_idx)


def slice_series(s: StationSeries, start_h: int, end_h: int) -> StationSeries:
    """Time-slice a station series to hours [start_h, end_h)."""
    return StationSeries(s.meta, s.start + pd.Timedelta(hours=start_h),
                         s.values[:, start_h:end_h].copy(), s.valid[:, start_h:end_h].copy())


def split_chronological(series: list[StationSeries], fractions=(0.7, 0.15, 0.15)):
    """Split every station's timeline into train/val/test spans by time."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"split fractions must sum to 1, got {fractions}")
    n = min(s.n_hours for s in series)
    a = int(n * fractions[0])
    b = a + int(n * fractions[1])
    return ([slice_series(s, 0, a) for s in series],
            [slice_series(s, a, b) for s in series],
            [slice_series(s, b, n) for s in series])


def _locf_fill(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Carry the last valid observation forward (and first valid backward at the
    head); all-invalid rows fall back to 0.5 in normalized units."""
    filled = values.copy()
    c, t = values.shape
    for ci in range(c):
        v = valid[ci]
        if not v.any():
            filled[ci] = 0.5
            continue
        idx = np.where(v, np.arange(t), -1)
        np.maximum.accumulate(idx, out=idx)
        first = np.argmax(v)
        idx[idx < 0] = first
        filled[ci] = filled[ci, idx]
    return filled


def make_windows(series: list[StationSeries], spec: NormalizationSpec, t_in: int,
                 horizon: int, stride: int = 1, hidden_station_ids: set | None = None,
                 max_invalid_target_fraction: float = 0.2) -> WindowBatch:
    """Build all sliding windows over the stations' common time range.

    Hidden stations contribute coordinates and targets only; their
    measurements never enter ``inputs``. Windows whose target block has more
    than ``max_invalid_target_fraction`` invalid entries are dropped.
    """
    if t_in < 1 or horizon < 1 or stride < 1:
        raise DataError("t_in, horizon and stride must be positive")
    hidden_station_ids = set(hidden_station_ids or ())
    unknown = hidden_station_ids - {s.meta.station_id for s in series}
    if unknown:
        raise DataError(f"hidden station ids not in dataset: {sorted(unknown)}")

    start = max(s.start for s in series)
    end = min(s.start + pd.Timedelta(hours=s.n_hours) for s in series)
    span = int((end - start) / pd.Timedelta(hours=1))
    if span < t_in + horizon:
        raise DataError(f"common span of {span}h is shorter than t_in+horizon "
                        f"= {t_in + horizon}h")

    aligned = [slice_series(s, int((start - s.start) / pd.Timedelta(hours=1)),
                            int((start - s.start) / pd.Timedelta(hours=1)) + span)
               for s in series]
    visible = [s for s in aligned if s.meta.station_id not in hidden_station_ids]
    if not visible:
        raise DataError("all stations hidden; nothing left for inputs")

    # normalized + gap-filled inputs for visible stations: [C, span, N]
    norm_in = np.stack([spec.apply(_locf_fill_normalized(s, spec)) for s in visible], axis=2)
    # normalized PM2.5 targets for every station: [span, N_target]
    tgt_vals = np.stack([spec.apply(s.values[PM25], channel=PM25) for s in aligned], axis=1)
    tgt_valid = np.stack([s.valid[PM25] for s in aligned], axis=1)

    starts = np.arange(0, span - t_in - horizon + 1, stride)
    times = pd.date_range(start, periods=span, freq="h")

    inputs, feats, targets, masks = [], [], [], []
    for w in starts:
        m = tgt_valid[w + t_in:w + t_in + horizon]
        if 1.0 - m.mean() > max_invalid_target_fraction:
            continue
        inputs.append(norm_in[:, w:w + t_in, :])
        feats.append(time_features(times[w:w + t_in]))
        targets.append(tgt_vals[w + t_in:w + t_in + horizon])
        masks.append(m)
    if not inputs:
        raise DataError("no windows survive the invalid-target filter")

    ids = [s.meta.station_id for s in aligned]
    hidden_idx = np.array([i for i, s in enumerate(aligned)
                           if s.meta.station_id in hidden_station_ids], dtype=int)
    visible_idx = np.array([i for i, s in enumerate(aligned)
                            if s.meta.station_id not in hidden_station_ids], dtype=int)
    return WindowBatch(
        inputs=np.stack(inputs).astype(np.float32),
        time_feats=np.stack(feats).astype(np.float32),
        targets=np.stack(targets).astype(np.float32),
        target_mask=np.stack(masks),
        station_coords=np.array([[s.meta.lat, s.meta.lon] for s in visible]),
        target_coords=np.array([[s.meta.lat, s.meta.lon] for s in aligned]),
        station_ids=[s.meta.station_id for s in visible],
        target_ids=ids,
        hidden_idx=hidden_idx,
        visible_idx=visible_idx,
    )


def _locf_fill_normalized(s: StationSeries, spec: NormalizationSpec) -> np.ndarray:
    # fill in physical units; the 0.5 fallback for dead channels is in
    # normalized units, so invert it per channel
    fallback = spec.invert(np.full((len(s.values), 1), 0.5))
    filled = _locf_fill(s.values, s.valid)
    dead = ~s.valid.any(axis=1)
    filled[dead] = fallback[dead]
    return filled
