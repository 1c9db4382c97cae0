"""Station records: loading, quality filtering and min-max scaling."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

#: Fixed pollutant channel order used everywhere in this package.
POLLUTANTS = ("pm25", "pm10", "co", "no2", "so2", "o3")
PM25 = 0

CSV_COLUMNS = ["station_id", "lat", "lon", "timestamp_utc"] + list(POLLUTANTS)


class DataError(ValueError):
    """Raised for malformed or inconsistent station data."""


@dataclass(frozen=True)
class StationMeta:
    station_id: str
    lat: float
    lon: float

    def __post_init__(self):
        if not (np.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise DataError(f"station {self.station_id}: latitude {self.lat} out of range")
        if not (np.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
            raise DataError(f"station {self.station_id}: longitude {self.lon} out of range")


@dataclass
class StationSeries:
    """Hourly multi-pollutant record for one station.

    ``values`` is [C x T] in the fixed ``POLLUTANTS`` order; gaps in time are
    kept in the array and flagged invalid, so the hour axis has no holes.
    """

    meta: StationMeta
    start: pd.Timestamp
    values: np.ndarray  # [C, T] float64
    valid: np.ndarray   # [C, T] bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.valid.shape:
            raise DataError("values/valid shape mismatch")
        if self.values.shape[0] != len(POLLUTANTS):
            raise DataError(f"expected {len(POLLUTANTS)} pollutant rows, got {self.values.shape[0]}")
        if not np.isfinite(self.values[self.valid]).all():
            raise DataError(f"station {self.meta.station_id}: non-finite value flagged valid")

    @property
    def n_hours(self) -> int:
        return self.values.shape[1]

    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if self.valid.size else 0.0


def load_stations(path: str | Path) -> list[StationSeries]:
    """Load station series from a CSV file or a directory of CSV files.

    Rows with missing or negative concentrations are kept but flagged invalid.
    Out-of-order rows are sorted by timestamp; duplicate (station, timestamp)
    pairs are an error.
    """
    path = Path(path)
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise DataError(f"no CSV files under {path}")

    frames = []
    for f in files:
        try:
            df = pd.read_csv(f, dtype={"station_id": str})
        except Exception as exc:
            raise DataError(f"{f}: unreadable CSV ({exc})") from exc
        missing = [c for c in CSV_COLUMNS if c not in df.columns]
        if missing:
            raise DataError(f"{f}: missing columns {missing}")
        df["_file"] = str(f)
        frames.append(df)
    data = pd.concat(frames, ignore_index=True)

    try:
        data["timestamp_utc"] = pd.to_datetime(data["timestamp_utc"], utc=True)
    except Exception as exc:
        raise DataError(f"unparseable timestamp: {exc}") from exc

    out = []
    for sid, g in data.groupby("station_id", sort=True):
        dup = g["timestamp_utc"].duplicated()
        if dup.any():
            t = g.loc[dup, "timestamp_utc"].iloc[0]
            raise DataError(f"duplicate timestamp {t} for station {sid} "
                            f"(file {g.loc[dup, '_file'].iloc[0]})")
        g = g.sort_values("timestamp_utc")
        lat, lon = float(g["lat"].iloc[0]), float(g["lon"].iloc[0])
        if not ((g["lat"] == lat).all() and (g["lon"] == lon).all()):
            raise DataError(f"station {sid}: inconsistent coordinates")
        meta = StationMeta(sid, lat, lon)

        start = g["timestamp_utc"].iloc[0].floor("h")
        hours = ((g["timestamp_utc"] - start) / pd.Timedelta(hours=1)).round().astype(int).to_numpy()
        n_hours = int(hours[-1]) + 1
        values = np.full((len(POLLUTANTS), n_hours), np.nan)
        for c, name in enumerate(POLLUTANTS):
            values[c, hours] = pd.to_numeric(g[name], errors="coerce").to_numpy()
        valid = np.isfinite(values) & (values >= 0)
        values[~valid] = 0.0
        out.append(StationSeries(meta, start, values, valid))
    return out


def save_stations(series: list[StationSeries], path: str | Path) -> None:
    """Write one combined CSV in the documented schema (inverse of load_stations)."""
    rows = []
    for s in series:
        times = pd.date_range(s.start, periods=s.n_hours, freq="h")
        df = pd.DataFrame({name: s.values[c] for c, name in enumerate(POLLUTANTS)})
        for c, name in enumerate(POLLUTANTS):
            df.loc[~s.valid[c], name] = np.nan
        df.insert(0, "station_id", s.meta.station_id)
        df.insert(1, "lat", s.meta.lat)
        df.insert(2, "lon", s.meta.lon)
        df.insert(3, "timestamp_utc", times.strftime("%Y-%m-%dT%H:%M:%SZ"))
        rows.append(df)
    pd.concat(rows, ignore_index=True).to_csv(path, index=False, float_format="%.6f")


def filter_complete(series: list[StationSeries], min_valid_fraction: float) -> list[StationSeries]:
    """Drop stations whose valid-data fraction falls below the threshold."""
    if not (0.0 < min_valid_fraction <= 1.0):
        raise DataError(f"min_valid_fraction must be in (0, 1], got {min_valid_fraction}")
    kept = [s for s in series if s.valid_fraction() >= min_valid_fraction]
    if not kept:
        raise DataError("no stations survive filtering")
    return kept


class NormalizationSpec:
    """Per-pollutant min-max scaling to [0, 1], fitted on valid entries only."""

    def __init__(self, vmin: np.ndarray, vmax: np.ndarray):
        self.vmin = np.asarray(vmin, dtype=np.float64)
        self.vmax = np.asarray(vmax, dtype=np.float64)
        if self.vmin.shape != (len(POLLUTANTS),) or self.vmax.shape != (len(POLLUTANTS),):
            raise DataError("normalization spec must have one (min, max) per pollutant")
        bad = np.flatnonzero(~(self.vmax > self.vmin))
        if bad.size:
            raise DataError(f"degenerate range for pollutant '{POLLUTANTS[bad[0]]}' "
                            f"(min {self.vmin[bad[0]]}, max {self.vmax[bad[0]]})")

    @classmethod
    def fit(cls, series: list[StationSeries]) -> "NormalizationSpec":
        vmin = np.full(len(POLLUTANTS), np.inf)
        vmax = np.full(len(POLLUTANTS), -np.inf)
        for s in series:
            for c in range(len(POLLUTANTS)):
                v = s.values[c, s.valid[c]]
                if v.size:
                    vmin[c] = min(vmin[c], v.min())
                    vmax[c] = max(vmax[c], v.max())
        empty = np.flatnonzero(~np.isfinite(vmin))
        if empty.size:
            raise DataError(f"pollutant '{POLLUTANTS[empty[0]]}' has no valid observations")
        return cls(vmin, vmax)

    def apply(self, values: np.ndarray, channel: int | None = None) -> np.ndarray:
        """Scale concentrations to [0, 1]. ``channel=None`` expects a leading C axis."""
        if channel is not None:
            return (values - self.vmin[channel]) / (self.vmax[channel] - self.vmin[channel])
        shape = (-1,) + (1,) * (values.ndim - 1)
        return (values - self.vmin.reshape(shape)) / (self.vmax - self.vmin).reshape(shape)

    def invert(self, normalized: np.ndarray, channel: int | None = None) -> np.ndarray:
        if channel is not None:
            return normalized * (self.vmax[channel] - self.vmin[channel]) + self.vmin[channel]
        shape = (-1,) + (1,) * (normalized.ndim - 1)
        return normalized * (self.vmax - self.vmin).reshape(shape) + self.vmin.reshape(shape)

    def to_dict(self) -> dict:
        return {"min": self.vmin.tolist(), "max": self.vmax.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationSpec":
        return cls(np.array(d["min"]), np.array(d["max"]))
