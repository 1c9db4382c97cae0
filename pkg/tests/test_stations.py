import numpy as np
import pandas as pd
import pytest

from aircast.stations import (DataError, NormalizationSpec, StationMeta,
                              filter_complete, load_stations, save_stations)
from conftest import make_series


def write_csv(path, rows):
    header = "station_id,lat,lon,timestamp_utc,pm25,pm10,co,no2,so2,o3\n"
    path.write_text(header + "\n".join(rows) + "\n")


def test_load_two_stations(tmp_path):
    f = tmp_path / "d.csv"
    write_csv(f, [
        "A,40.0,116.0,2016-01-01T00:00:00Z,10,20,0.5,8,4,60",
        "A,40.0,116.0,2016-01-01T01:00:00Z,12,22,0.5,8,4,60",
        "B,41.0,117.0,2016-01-01T00:00:00Z,30,40,0.6,9,5,50",
        "B,41.0,117.0,2016-01-01T01:00:00Z,32,42,0.6,9,5,50",
    ])
    series = load_stations(f)
    assert len(series) == 2
    assert [s.meta.station_id for s in series] == ["A", "B"]
    assert all(s.n_hours == 2 for s in series)
    assert series[0].values[0, 0] == 10.0


def test_negative_concentration_marked_invalid(tmp_path):
    f = tmp_path / "d.csv"
    write_csv(f, [
        "A,40.0,116.0,2016-01-01T00:00:00Z,-5,20,0.5,8,4,60",
        "A,40.0,116.0,2016-01-01T01:00:00Z,12,22,0.5,8,4,60",
    ])
    s = load_stations(f)[0]
    assert not s.valid[0, 0]
    assert s.valid[1, 0]  # pm10 in the same row stays valid


def test_missing_field_marked_invalid(tmp_path):
    f = tmp_path / "d.csv"
    write_csv(f, [
        "A,40.0,116.0,2016-01-01T00:00:00Z,,20,0.5,8,4,60",
        "A,40.0,116.0,2016-01-01T01:00:00Z,12,22,0.5,8,4,60",
    ])
    s = load_stations(f)[0]
    assert not s.valid[0, 0]


def test_out_of_order_rows_equal_sorted_file(tmp_path):
    rows = [f"A,40.0,116.0,2016-01-01T{h:02d}:00:00Z,{10 + h},20,0.5,8,4,60"
            for h in range(5)]
    shuffled, ordered = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(shuffled, [rows[3], rows[0], rows[4], rows[1], rows[2]])
    write_csv(ordered, rows)
    a, b = load_stations(shuffled)[0], load_stations(ordered)[0]
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.valid, b.valid)
    assert a.start == b.start


def test_duplicate_timestamp_rejected(tmp_path):
    f = tmp_path / "d.csv"
    write_csv(f, [
        "A,40.0,116.0,2016-01-01T00:00:00Z,10,20,0.5,8,4,60",
        "A,40.0,116.0,2016-01-01T00:00:00Z,11,20,0.5,8,4,60",
    ])
    with pytest.raises(DataError, match="duplicate"):
        load_stations(f)


def test_time_gap_becomes_invalid_hours(tmp_path):
    f = tmp_path / "d.csv"
    write_csv(f, [
        "A,40.0,116.0,2016-01-01T00:00:00Z,10,20,0.5,8,4,60",
        "A,40.0,116.0,2016-01-01T03:00:00Z,12,22,0.5,8,4,60",
    ])
    s = load_stations(f)[0]
    assert s.n_hours == 4
    assert not s.valid[:, 1].any() and not s.valid[:, 2].any()


def test_save_load_round_trip(tmp_path, small_dataset):
    path = tmp_path / "out.csv"
    save_stations(small_dataset, path)
    back = load_stations(path)
    assert len(back) == len(small_dataset)
    by_id = {s.meta.station_id: s for s in back}
    for s in small_dataset:
        r = by_id[s.meta.station_id]
        assert np.allclose(r.values[r.valid], s.values[s.valid], rtol=1e-5)
        assert np.array_equal(r.valid, s.valid)


def test_bad_coordinates_rejected():
    with pytest.raises(DataError):
        StationMeta("X", 95.0, 116.0)
    with pytest.raises(DataError):
        StationMeta("X", 40.0, 200.0)


class TestFilterComplete:
    def test_full_threshold_drops_incomplete(self):
        s = [make_series("A", valid_fraction=1.0, seed=1),
             make_series("B", valid_fraction=0.99, seed=2)]
        s[1].valid[0, 0] = False
        kept = filter_complete(s, 1.0)
        assert [x.meta.station_id for x in kept] == ["A"]

    def test_identity_when_all_complete(self):
        s = [make_series(f"S{i}", seed=i) for i in range(3)]
        assert filter_complete(s, 0.5) == s

    def test_counts_by_construction(self):
        series = []
        for i in range(10):
            s = make_series(f"S{i}", hours=100, seed=i)
            frac = i / 10.0
            s.valid[:] = False
            n_valid = int(round(frac * s.valid.size))
            s.valid.flat[:n_valid] = True
            series.append(s)
        kept = filter_complete(series, 0.55)
        assert len(kept) == 4  # fractions 0.6 .. 0.9

    def test_idempotent(self):
        s = [make_series(f"S{i}", valid_fraction=0.9, seed=i) for i in range(5)]
        once = filter_complete(s, 0.5)
        assert filter_complete(once, 0.5) == once

    def test_empty_result_is_error(self):
        s = [make_series("A", valid_fraction=0.1, seed=3)]
        with pytest.raises(DataError, match="no stations"):
            filter_complete(s, 0.99)

    def test_threshold_validation(self):
        with pytest.raises(DataError):
            filter_complete([make_series()], 0.0)


class TestNormalization:
    def test_min_max_from_single_station(self):
        s = make_series(hours=2)
        s.values[0] = [10.0, 30.0]
        s.valid[:] = True
        spec = NormalizationSpec.fit([s])
        assert spec.vmin[0] == 10.0 and spec.vmax[0] == 30.0
        out = spec.apply(s.values[0], channel=0)
        assert out[0] == pytest.approx(0.0) and out[1] == pytest.approx(1.0)

    def test_fitting_data_lands_in_unit_interval(self, small_dataset, small_norm):
        for s in small_dataset:
            n = small_norm.apply(s.values)
            assert (n[s.valid] >= -1e-12).all() and (n[s.valid] <= 1 + 1e-12).all()

    def test_round_trip_identity(self, small_norm):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 500, size=(6, 1000))
        back = small_norm.invert(small_norm.apply(x))
        assert np.max(np.abs(back - x) / np.maximum(np.abs(x), 1e-12)) < 1e-9

    def test_invalid_entries_ignored_when_fitting(self):
        s = make_series(hours=3)
        s.values[0] = [10.0, 9999.0, 30.0]
        s.valid[:] = True
        s.valid[0, 1] = False
        spec = NormalizationSpec.fit([s])
        assert spec.vmax[0] == 30.0

    def test_degenerate_channel_rejected(self):
        s = make_series(hours=4)
        s.values[2] = 7.0
        s.valid[:] = True
        with pytest.raises(DataError, match="co"):
            NormalizationSpec.fit([s])

    def test_all_invalid_channel_named(self):
        s = make_series(hours=4)
        s.valid[5] = False
        with pytest.raises(DataError, match="o3"):
            NormalizationSpec.fit([s])
