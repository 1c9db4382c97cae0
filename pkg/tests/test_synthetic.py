import numpy as np
import pytest

from aircast.stations import StationMeta
from aircast.synthetic import SynthConfig, synth_dataset


def test_same_seed_identical():
    a = synth_dataset(6, 720, seed=5)
    b = synth_dataset(6, 720, seed=5)
    for x, y in zip(a, b):
        assert x.meta == y.meta
        assert np.array_equal(x.values, y.values)


def test_different_seed_differs():
    a = synth_dataset(6, 720, seed=5)
    b = synth_dataset(6, 720, seed=6)
    assert not np.array_equal(a[0].values, b[0].values)


def test_preconditions():
    with pytest.raises(ValueError):
        synth_dataset(3, 720, seed=0)
    with pytest.raises(ValueError):
        synth_dataset(6, 100, seed=0)


def test_zero_diurnal_amp_flattens_hourly_means():
    cfg = SynthConfig(n_stations=6, hours=2160, seed=3, diurnal_amp=0.0,
                      weekly_amp=0.0, n_plumes=0, noise_std=2.0, rush_amp=0.0,
                      episode_amp=0.0)
    series = synth_dataset(config=cfg)
    pm = np.stack([s.values[0] for s in series])
    hours = np.arange(cfg.hours) % 24
    by_hour = np.array([pm[:, hours == h].mean() for h in range(24)])
    assert by_hour.max() - by_hour.min() < 1.0  # flat within noise


def test_nonzero_diurnal_amp_shows_cycle():
    cfg = SynthConfig(n_stations=6, hours=2160, seed=3, diurnal_amp=20.0,
                      weekly_amp=0.0, n_plumes=0, noise_std=1.0, rush_amp=0.0)
    series = synth_dataset(config=cfg)
    pm = np.stack([s.values[0] for s in series])
    hours = np.arange(cfg.hours) % 24
    by_hour = np.array([pm[:, hours == h].mean() for h in range(24)])
    assert by_hour.max() - by_hour.min() > 15.0


def test_rush_spikes_follow_restriction_schedule():
    cfg = SynthConfig(n_stations=6, hours=2160, seed=3, diurnal_amp=0.0,
                      weekly_amp=0.0, n_plumes=0, noise_std=1.0,
                      rush_amp=25.0, restricted_factor=0.0)
    series = synth_dataset(config=cfg)
    pm = np.stack([s.values[0] for s in series])
    dow = (np.arange(cfg.hours) // 24 + 4) % 7   # 2016-01-01 was a Friday
    hours = np.arange(cfg.hours) % 24
    morning = hours == 8
    restricted = (dow == 2) | (dow == 4) | (dow == 5)
    open_level = pm[:, morning & ~restricted].mean()
    restricted_level = pm[:, morning & restricted].mean()
    assert open_level - restricted_level > 10.0


def test_colocated_stations_strongly_correlated():
    rng = np.random.default_rng(1)
    coords = np.column_stack([rng.uniform(38.5, 41.5, 8), rng.uniform(114.5, 119.5, 8)])
    coords[1] = coords[0]  # co-locate stations 0 and 1
    series = synth_dataset(config=SynthConfig(n_stations=8, hours=1440, seed=9),
                           coords=coords)
    corr = np.corrcoef(series[0].values[0], series[1].values[0])[0, 1]
    assert corr > 0.95


def test_field_is_smooth_in_space():
    series = synth_dataset(20, 1440, seed=2)
    from aircast.geo import haversine_km
    pm = np.stack([s.values[0] for s in series])
    lats = np.array([s.meta.lat for s in series])
    lons = np.array([s.meta.lon for s in series])
    d = haversine_km(lats[:, None], lons[:, None], lats[None, :], lons[None, :])
    corr = np.corrcoef(pm)
    near = (d > 0) & (d < 60)
    far = d > 300
    if near.any() and far.any():
        assert corr[near].mean() > corr[far].mean()


def test_other_pollutants_track_pm25():
    series = synth_dataset(6, 1440, seed=4)
    for s in series:
        assert np.corrcoef(s.values[0], s.values[1])[0, 1] > 0.8  # pm10
        assert np.corrcoef(s.values[0], s.values[5])[0, 1] < -0.5  # o3 anti-correlated
