import numpy as np
import pytest
import torch

from aircast.evaluation import predict_batched
from aircast.grid import (ReanalysisGrid, grid_from_csv, grid_heatmap,
                          grid_to_csv, grid_to_text, reanalyze_grid,
                          station_predictions_csv)
from aircast.interpolation import knn_interpolate
from aircast.network import ModelConfig, ReanalysisModel
from aircast.stations import PM25
from aircast.windows import make_windows


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(0)
    return ReanalysisModel(ModelConfig(hidden_dim=8, n_heads=2, t_in=24,
                                       horizon=6, k_neighbors=3))


def test_grid_requires_station_in_bbox(model, small_dataset, small_norm):
    with pytest.raises(ValueError, match="bbox"):
        reanalyze_grid(model, small_norm, small_dataset, (0, 0, 1, 1), 0.5)


def test_grid_axes_increasing_and_values_clamped(model, small_dataset, small_norm):
    grid = reanalyze_grid(model, small_norm, small_dataset,
                          (38.5, 114.5, 41.5, 119.5), 1.0)
    assert np.all(np.diff(grid.lat_axis) > 0)
    assert np.all(np.diff(grid.lon_axis) > 0)
    assert (grid.values >= 0).all()


def test_node_on_station_with_k1_matches_station_prediction(
        model, small_dataset, small_norm):
    s = small_dataset[0]
    bbox = (s.meta.lat, s.meta.lon, s.meta.lat + 1e-6, s.meta.lon + 1e-6)
    grid = reanalyze_grid(model, small_norm, small_dataset, bbox, 1.0, k=1)
    n_hours = min(x.n_hours for x in small_dataset)
    batch = make_windows(small_dataset, small_norm, 24, 6,
                         stride=max(n_hours - 30, 1))
    preds = predict_batched(model, batch.select([len(batch) - 1]))
    expected = small_norm.invert(preds[0, :, 0].astype(np.float64),
                                 channel=PM25).mean()
    assert grid.values[0, 0] == pytest.approx(max(expected, 0.0), abs=1e-4)


def test_grid_matches_per_node_interpolation_oracle(model, small_dataset, small_norm):
    bbox = (38.5, 114.5, 41.5, 119.5)
    res = 0.5
    grid = reanalyze_grid(model, small_norm, small_dataset, bbox, res, k=3)
    n_hours = min(x.n_hours for x in small_dataset)
    batch = make_windows(small_dataset, small_norm, 24, 6,
                         stride=max(n_hours - 30, 1))
    last = batch.select([len(batch) - 1])
    preds, _ = model.forward(last)
    for i, la in enumerate(grid.lat_axis):
        for j, lo in enumerate(grid.lon_axis[:3]):
            node = np.array([[la, lo]])
            val = knn_interpolate(preds[0].detach().numpy(), last.station_coords,
                                  node, 3)
            expected = max(small_norm.invert(val[:, 0].astype(np.float64),
                                             channel=PM25).mean(), 0.0)
            assert grid.values[i, j] == pytest.approx(expected, abs=1e-5)


def test_uniform_predictions_give_uniform_grid(small_dataset, small_norm):
    model = ReanalysisModel(ModelConfig(hidden_dim=8, n_heads=2, t_in=24,
                                        horizon=6, k_neighbors=3))
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
        model.head.bias.fill_(0.5)  # every station predicts the same constant
    grid = reanalyze_grid(model, small_norm, small_dataset,
                          (38.5, 114.5, 41.5, 119.5), 1.0)
    assert np.ptp(grid.values) < 1e-4


def test_csv_round_trip(model, small_dataset, small_norm, tmp_path):
    grid = reanalyze_grid(model, small_norm, small_dataset,
                          (38.5, 114.5, 41.5, 119.5), 1.0)
    path = tmp_path / "grid.csv"
    grid_to_csv(grid, path)
    lats, lons, values = grid_from_csv(path)
    assert np.allclose(lats, grid.lat_axis)
    assert np.allclose(lons, grid.lon_axis)
    assert np.allclose(values, grid.values, rtol=1e-9)


def test_text_and_heatmap_outputs(model, small_dataset, small_norm, tmp_path):
    grid = reanalyze_grid(model, small_norm, small_dataset,
                          (38.5, 114.5, 41.5, 119.5), 1.0)
    grid_to_text(grid, tmp_path / "grid.txt")
    text = (tmp_path / "grid.txt").read_text()
    assert text.startswith("# n_lat")
    assert f"# k {grid.k}" in text
    grid_heatmap(grid, tmp_path / "grid.png")
    assert (tmp_path / "grid.png").stat().st_size > 0


def test_station_predictions_csv(model, small_dataset, small_norm, tmp_path):
    import pandas as pd
    path = tmp_path / "preds.csv"
    station_predictions_csv(model, small_norm, small_dataset, path, stride=200)
    df = pd.read_csv(path)
    assert list(df.columns) == ["station_id", "timestamp", "pm25_pred",
                                "pm25_obs_if_any"]
    assert df["station_id"].nunique() == len(small_dataset)


def test_invalid_grid_record_rejected():
    with pytest.raises(ValueError):
        ReanalysisGrid(np.array([1.0, 0.5]), np.array([0.0, 1.0]),
                       np.zeros((2, 2)), "t0", "t1", 5)
    with pytest.raises(ValueError):
        ReanalysisGrid(np.array([0.0, 1.0]), np.array([0.0, 1.0]),
                       -np.ones((2, 2)), "t0", "t1", 5)
