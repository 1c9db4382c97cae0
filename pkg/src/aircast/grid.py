"""Gridded reanalysis: interpolate model output onto a lat/lon raster and
export it as CSV, a header-bearing text grid, and a raster heatmap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .evaluation import predict_batched
from .network import ReanalysisModel
from .stations import NormalizationSpec, StationSeries, PM25
from .windows import make_windows


@dataclass
class ReanalysisGrid:
    lat_axis: np.ndarray
    lon_axis: np.ndarray
    values: np.ndarray          # [n_lat, n_lon] horizon-mean PM2.5, ug/m3
    t_start: str
    t_end: str
    k: int
    checkpoint_id: str = ""
    n_clamped: int = 0

    def __post_init__(self):
        if not (np.all(np.diff(self.lat_axis) > 0) and np.all(np.diff(self.lon_axis) > 0)):
            raise ValueError("grid axes must be strictly increasing")
        if self.values.shape != (len(self.lat_axis), len(self.lon_axis)):
            raise ValueError("grid value shape mismatch")
        if not np.isfinite(self.values).all() or (self.values < 0).any():
            raise ValueError("grid values must be finite and non-negative")


def grid_axes(bbox, resolution: float):
    lat0, lon0, lat1, lon1 = bbox
    if lat1 <= lat0 or lon1 <= lon0 or resolution <= 0:
        raise ValueError(f"invalid bbox/resolution: {bbox}, {resolution}")
    lats = np.arange(lat0, lat1 + resolution / 2, resolution)
    lons = np.arange(lon0, lon1 + resolution / 2, resolution)
    return lats, lons


def reanalyze_grid(model: ReanalysisModel, norm: NormalizationSpec,
                   series: list[StationSeries], bbox, resolution: float,
                   k: int | None = None, checkpoint_id: str = "") -> ReanalysisGrid:
    """Horizon-mean PM2.5 on a regular grid, from the most recent input window.

    Negative denormalized values are clamped to zero; the clamp count is kept
    on the grid record.
    """
    lat0, lon0, lat1, lon1 = bbox
    inside = [s for s in series
              if lat0 <= s.meta.lat <= lat1 and lon0 <= s.meta.lon <= lon1]
    if not inside:
        raise ValueError("bbox contains no stations")
    lats, lons = grid_axes(bbox, resolution)
    nodes = np.array([(la, lo) for la in lats for lo in lons])

    t_in, horizon = model.config.t_in, model.config.horizon
    n_hours = min(s.n_hours for s in series)
    batch = make_windows(series, norm, t_in, horizon,
                         stride=max(n_hours - t_in - horizon, 1))
    last = batch.select([len(batch) - 1])
    preds = predict_batched(model, last, query_coords=nodes, k=k)  # [1, H, M]
    field = norm.invert(preds[0].astype(np.float64), channel=PM25).mean(axis=0)
    n_clamped = int((field < 0).sum())
    field = np.clip(field, 0.0, None).reshape(len(lats), len(lons))

    t0 = max(s.start for s in series)
    # the last window's targets cover [span - horizon, span)
    span = int((min(s.start + pd.Timedelta(hours=s.n_hours) for s in series) - t0)
               / pd.Timedelta(hours=1))
    t_start = (t0 + pd.Timedelta(hours=span - horizon)).isoformat()
    t_end = (t0 + pd.Timedelta(hours=span - 1)).isoformat()
    return ReanalysisGrid(lats, lons, field, t_start, t_end,
                          k or model.config.k_neighbors, checkpoint_id, n_clamped)


def grid_to_csv(grid: ReanalysisGrid, path) -> None:
    rows = [(la, lo, grid.values[i, j])
            for i, la in enumerate(grid.lat_axis)
            for j, lo in enumerate(grid.lon_axis)]
    pd.DataFrame(rows, columns=["lat", "lon", "pm25"]).to_csv(path, index=False,
                                                              float_format="%.10g")


def grid_from_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    df = pd.read_csv(path)
    lats = np.unique(df["lat"].to_numpy())
    lons = np.unique(df["lon"].to_numpy())
    values = df["pm25"].to_numpy().reshape(len(lats), len(lons))
    return lats, lons, values


def grid_to_text(grid: ReanalysisGrid, path) -> None:
    """Self-describing text raster: '# key value' header lines, then rows of
    values ordered south-to-north, west-to-east."""
    with open(path, "w") as f:
        f.write(f"# n_lat {len(grid.lat_axis)}\n")
        f.write(f"# n_lon {len(grid.lon_axis)}\n")
        f.write(f"# lat_min {grid.lat_axis[0]:.10g}\n")
        f.write(f"# lon_min {grid.lon_axis[0]:.10g}\n")
        f.write(f"# lat_step {(grid.lat_axis[1] - grid.lat_axis[0]) if len(grid.lat_axis) > 1 else 0:.10g}\n")
        f.write(f"# lon_step {(grid.lon_axis[1] - grid.lon_axis[0]) if len(grid.lon_axis) > 1 else 0:.10g}\n")
        f.write(f"# t_start {grid.t_start}\n")
        f.write(f"# t_end {grid.t_end}\n")
        f.write(f"# k {grid.k}\n")
        f.write(f"# checkpoint {grid.checkpoint_id or '-'}\n")
        f.write(f"# n_clamped {grid.n_clamped}\n")
        for row in grid.values:
            f.write(" ".join(f"{v:.10g}" for v in row) + "\n")


def grid_heatmap(grid: ReanalysisGrid, path, cmap: str = "viridis") -> None:
    """Plain raster heatmap, low PM2.5 dark to high PM2.5 bright (viridis)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.imsave(path, grid.values[::-1], cmap=cmap, origin="upper")


def station_predictions_csv(model: ReanalysisModel, norm: NormalizationSpec,
                            series: list[StationSeries], path, stride: int = 1) -> None:
    """Per-station horizon predictions next to observed values where present."""
    batch = make_windows(series, norm, model.config.t_in, model.config.horizon,
                         stride=stride)
    preds = predict_batched(model, batch)
    y_hat = norm.invert(preds.astype(np.float64), channel=PM25)
    y = norm.invert(batch.targets.astype(np.float64), channel=PM25)
    t0 = max(s.start for s in series)
    rows = []
    for w in range(len(batch)):
        for h in range(model.config.horizon):
            ts = t0 + pd.Timedelta(hours=w * stride + model.config.t_in + h)
            for j, sid in enumerate(batch.station_ids):
                obs = y[w, h, j] if batch.target_mask[w, h, j] else np.nan
                rows.append((sid, ts.isoformat(), y_hat[w, h, j], obs))
    pd.DataFrame(rows, columns=["station_id", "timestamp", "pm25_pred",
                                "pm25_obs_if_any"]).to_csv(path, index=False)
