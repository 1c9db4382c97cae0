import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from aircast.temporal import cyclic_encode, time_features


def test_zero_index_maps_to_unit_cos():
    s, c = cyclic_encode(0, 24)
    assert s == pytest.approx(0.0, abs=1e-12)
    assert c == pytest.approx(1.0, abs=1e-12)


def test_quarter_period():
    s, c = cyclic_encode(6, 24)
    assert s == pytest.approx(1.0, abs=1e-12)
    assert c == pytest.approx(0.0, abs=1e-12)


def test_midnight_wraparound_is_continuous():
    # the encoded gap between 23:00 and 00:00 equals any other one-hour gap
    def dist(a, b):
        return float(np.hypot(*(np.subtract(cyclic_encode(a, 24), cyclic_encode(b, 24)))))

    wrap = dist(23, 0)
    inner = dist(11, 12)
    assert wrap == pytest.approx(inner, abs=1e-12)
    assert wrap == pytest.approx(2 * np.sin(np.pi / 24), abs=1e-12)
    assert wrap == pytest.approx(0.2611, abs=1e-3)


def test_zero_cycle_rejected():
    with pytest.raises(ValueError):
        cyclic_encode(3, 0)


@given(st.integers(min_value=-10_000, max_value=10_000),
       st.integers(min_value=1, max_value=10_000))
def test_unit_norm_and_periodicity(t, cycle):
    s, c = cyclic_encode(t, cycle)
    assert abs(s * s + c * c - 1.0) < 1e-9
    s2, c2 = cyclic_encode(t + cycle, cycle)
    assert abs(s - s2) < 1e-9 and abs(c - c2) < 1e-9


def test_time_features_shape_and_values():
    times = pd.date_range("2016-01-01", periods=30, freq="h", tz="UTC")
    f = time_features(times)
    assert f.shape == (6, 30)
    # first timestamp is midnight: hour channel at (sin 0, cos 1)
    assert f[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert f[1, 0] == pytest.approx(1.0, abs=1e-12)
    # every (sin, cos) pair lies on the unit circle
    for i in range(0, 6, 2):
        assert np.allclose(f[i] ** 2 + f[i + 1] ** 2, 1.0, atol=1e-9)
