"""Desk-scale synthetic station network with a smooth spatiotemporal PM2.5 field.

The generated field mixes a diurnal cycle, regional multi-day pollution
episodes (a hysteresis build-up/crash oscillator), morning rush-hour spikes
gated by an alternating day-of-week traffic-restriction schedule, wandering
Gaussian plumes and spatially correlated noise. Forecasting and spatial
interpolation both have real structure to learn, and the restriction schedule
adds calendar structure that is only observable through the clock: which days
carry a rush spike cannot be fully inferred from the previous day's signal.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd

from .geo import haversine_km
from .stations import StationMeta, StationSeries

START = pd.Timestamp("2016-01-01 00:00:00", tz="UTC")
BBOX = (38.5, 114.5, 41.5, 119.5)  # lat0, lon0, lat1, lon1


@dataclass
class SynthConfig:
    n_stations: int = 20
    hours: int = 4320
    seed: int = 42
    diurnal_amp: float = 20.0
    weekly_amp: float = 0.0
    n_plumes: int = 3
    noise_std: float = 2.0
    base_level: float = 15.0
    restricted_factor: float = 0.0   # rush damping on traffic-restricted days
    plume_amp: float = 6.0
    noise_corr_km: float = 150.0
    rush_amp: float = 80.0           # morning rush-hour spike height
    rush_width: float = 1.7          # spike width, hours
    plume_jitter: float = 0.35       # random-walk wander of plume tracks, degrees
    episode_amp: float = 75.0        # peak height of pollution-episode sawtooth
    episode_ramp: float = 1.0        # buildup rate in oscillator units per hour
    episode_noise: float = 0.2       # innovation std of the episode oscillator

    def validate(self):
        if self.n_stations < 4:
            raise ValueError(f"need at least 4 stations, got {self.n_stations}")
        if self.hours < 720:
            raise ValueError(f"need at least 720 hours, got {self.hours}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _episode_sawtooth(cfg: SynthConfig, rng: np.random.Generator,
                      dist: np.ndarray) -> np.ndarray:
    """Regional pollution episodes as a hysteresis relaxation oscillator.

    A single synoptic-scale latent builds up linearly until it hits a ceiling,
    then relaxes exponentially toward a floor before building again — the
    classic stagnation/ventilation sawtooth. Every station sees the same
    episode timeline scaled by a smooth spatial intensity field, so the
    component interpolates across space, while its temporal continuation
    depends nonlinearly on level and direction (the same level means "rising"
    or "crashing" depending on history).
    """
    if cfg.episode_amp == 0.0:
        return np.zeros((cfg.n_stations, cfg.hours))
    theta, floor, resume, decay = 45.0, 10.0, 18.0, 0.85
    n = cfg.n_stations
    eps = cfg.episode_noise * rng.standard_normal(cfg.hours)
    u = np.zeros(cfg.hours)
    u[0] = np.clip((floor + theta) / 2 + 5.0 * rng.standard_normal(), floor, theta)
    falling = False
    for t in range(cfg.hours - 1):
        falling = (falling or u[t] >= theta) and u[t] > resume
        nxt = floor + decay * (u[t] - floor) if falling else u[t] + cfg.episode_ramp
        u[t + 1] = max(nxt + eps[t], 0.0)
    # smooth per-station episode intensity (regional events hit everywhere,
    # a little harder in some places than others)
    chol = np.linalg.cholesky(np.exp(-dist / 800.0) + 1e-9 * np.eye(n))
    intensity = np.clip(1.0 + 0.1 * (chol @ rng.standard_normal(n)), 0.8, 1.2)
    e = cfg.episode_amp * (u - floor) / (theta - floor)
    return intensity[:, None] * e[None, :]


def synth_dataset(n_stations: int = 20, hours: int = 4320, seed: int = 42,
                  config: SynthConfig | None = None,
                  coords: np.ndarray | None = None) -> list[StationSeries]:
    """Generate a deterministic synthetic station dataset for the given seed.

    ``coords`` ([N, 2] lat/lon) overrides the random station placement.
    """
    cfg = config or SynthConfig(n_stations=n_stations, hours=hours, seed=seed)
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    lat0, lon0, lat1, lon1 = BBOX

    if coords is not None:
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (cfg.n_stations, 2):
            raise ValueError(f"coords must be [{cfg.n_stations} x 2]")
        lats, lons = coords[:, 0].copy(), coords[:, 1].copy()
    else:
        lats = rng.uniform(lat0, lat1, cfg.n_stations)
        lons = rng.uniform(lon0, lon1, cfg.n_stations)

    t = np.arange(cfg.hours, dtype=np.float64)
    times = pd.date_range(START, periods=cfg.hours, freq="h")
    dow = times.dayofweek.to_numpy()
    # alternating traffic-restriction schedule (Mon..Sun): Wed/Fri/Sat are
    # restricted days. Knowing whether yesterday had a rush spike does not
    # determine whether today will — the calendar does.
    restricted = (dow == 2) | (dow == 4) | (dow == 5)
    day_factor = np.where(restricted, cfg.restricted_factor, 1.0)

    # smooth spatial phase fields keep nearby stations in sync
    phi = 0.15 * (lats - lat0) + 0.08 * (lons - lon0)
    psi = 0.15 * (lats - lat0) - 0.1 * (lons - lon0)

    diurnal = cfg.diurnal_amp * np.sin(2 * np.pi * t / 24.0 + phi[:, None])
    weekly = cfg.weekly_amp * np.sin(2 * np.pi * t / 168.0 + psi[:, None])

    plume = np.zeros((cfg.n_stations, cfg.hours))
    clat0, clon0 = (lat0 + lat1) / 2, (lon0 + lon1) / 2
    for _ in range(cfg.n_plumes):
        period = rng.uniform(60.0, 220.0)            # orbit period, off the 24h cycle
        amp_period = rng.uniform(90.0, 300.0)
        theta = rng.uniform(0, 2 * np.pi)
        r_lat = rng.uniform(0.4, 1.2)
        r_lon = rng.uniform(0.6, 2.0)
        sigma = rng.uniform(1.4, 2.2)                # plume width, degrees
        amp = cfg.plume_amp * rng.uniform(0.7, 1.3)
        # smoothed random-walk wander keeps plume tracks unpredictable beyond
        # their recent motion
        def wander():
            walk = np.cumsum(rng.standard_normal(cfg.hours))
            kernel = np.ones(12) / 12.0
            walk = np.convolve(walk, kernel, mode="same")
            sd = walk.std()
            return cfg.plume_jitter * walk / sd if sd > 0 else walk

        clat = clat0 + r_lat * np.cos(2 * np.pi * t / period + theta) + wander()
        clon = clon0 + r_lon * np.sin(2 * np.pi * t / period + theta) + wander()
        a_t = amp * (1.0 + 0.5 * np.sin(2 * np.pi * t / amp_period + theta))
        coslat = np.cos(np.radians(clat0))
        d2 = (lats[:, None] - clat[None, :]) ** 2 \
            + (coslat * (lons[:, None] - clon[None, :])) ** 2
        plume += a_t[None, :] * np.exp(-d2 / (2.0 * sigma ** 2))

    dist = haversine_km(lats[:, None], lons[:, None], lats[None, :], lons[None, :])
    cov = np.exp(-dist / cfg.noise_corr_km)
    chol = np.linalg.cholesky(cov + 1e-9 * np.eye(cfg.n_stations))
    noise = cfg.noise_std * (chol @ rng.standard_normal((cfg.n_stations, cfg.hours)))

    episodes = _episode_sawtooth(cfg, rng, dist)

    # morning rush-hour spike on unrestricted days: sharp, clock-locked
    # structure gated by the calendar and amplified during pollution episodes
    # (stagnant-air traffic buildup) — a multiplicative interaction
    hod = times.hour.to_numpy().astype(np.float64)
    delta = np.abs(hod - 8.5)
    delta = np.minimum(delta, 24.0 - delta)
    bumps = np.exp(-delta ** 2 / (2.0 * cfg.rush_width ** 2))
    # per-station rush intensity varies smoothly in space (an "urban density"
    # field) so hidden-station interpolation can recover it from neighbours
    rush_station = np.clip(1.0 + 0.15 * (chol @ rng.standard_normal(cfg.n_stations)),
                           0.7, 1.3)
    stagnation = 0.5 + 0.5 * episodes / max(cfg.episode_amp, 1e-12) \
        if cfg.episode_amp else np.ones_like(episodes)
    rush = cfg.rush_amp * rush_station[:, None] * bumps[None, :] \
        * day_factor[None, :] * stagnation

    pm25 = np.clip(cfg.base_level + episodes + diurnal + rush + weekly + plume + noise,
                   1.0, None)

    series = []
    for i in range(cfg.n_stations):
        p = pm25[i]
        # other pollutants: noisy affine companions of PM2.5
        pm10 = np.clip(1.5 * p + 10.0 + rng.normal(0, 5.0, cfg.hours), 0.5, None)
        co = np.clip(0.015 * p + 0.4 + rng.normal(0, 0.05, cfg.hours), 0.05, None)
        no2 = np.clip(0.5 * p + 8.0 + rng.normal(0, 3.0, cfg.hours), 0.5, None)
        so2 = np.clip(0.3 * p + 4.0 + rng.normal(0, 2.0, cfg.hours), 0.5, None)
        o3 = np.clip(90.0 - 0.5 * p + rng.normal(0, 5.0, cfg.hours), 0.5, None)
        values = np.stack([p, pm10, co, no2, so2, o3])
        series.append(StationSeries(
            meta=StationMeta(f"S{i:03d}", float(lats[i]), float(lons[i])),
            start=START,
            values=values,
            valid=np.ones_like(values, dtype=bool),
        ))
    return series
