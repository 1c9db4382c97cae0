import numpy as np
import pandas as pd
import pytest

from aircast.stations import NormalizationSpec, StationMeta, StationSeries
from aircast.synthetic import synth_dataset


@pytest.fixture(scope="session")
def small_dataset():
    return synth_dataset(8, 720, seed=7)


@pytest.fixture(scope="session")
def small_norm(small_dataset):
    return NormalizationSpec.fit(small_dataset)


def make_series(station_id="S0", lat=40.0, lon=116.0, hours=48, seed=0,
                start="2016-01-01", valid_fraction=1.0):
    rng = np.random.default_rng(seed)
    values = rng.uniform(5.0, 100.0, size=(6, hours))
    valid = rng.random((6, hours)) < valid_fraction
    return StationSeries(StationMeta(station_id, lat, lon),
                         pd.Timestamp(start, tz="UTC"), values, valid)
