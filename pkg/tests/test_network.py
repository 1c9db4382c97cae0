import numpy as np
import pytest
import torch

from aircast.interpolation import knn_interpolate
from aircast.network import ModelConfig, ReanalysisModel
from aircast.nn import finite_difference_check, masked_mse
from aircast.windows import make_windows


def tiny_config(**kw):
    base = dict(hidden_dim=8, n_heads=2, t_in=24, horizon=6, k_neighbors=3)
    base.update(kw)
    return ModelConfig(**base)


def tiny_batch(small_dataset, small_norm, **kw):
    return make_windows(small_dataset, small_norm, 24, 6, stride=200, **kw)


class TestConfig:
    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            ModelConfig(hidden_dim=10, n_heads=3).validate()

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            ModelConfig(knn_weight_mode="idw").validate()

    def test_round_trip(self):
        cfg = tiny_config()
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestEncode:
    def test_zero_parameters_give_zero_features(self, small_dataset, small_norm):
        model = ReanalysisModel(tiny_config())
        with torch.no_grad():
            for p in model.parameters():
                p.zero_()
        batch = tiny_batch(small_dataset, small_norm)
        pooled = model.encode(torch.as_tensor(batch.inputs[:2]),
                              torch.as_tensor(batch.time_feats[:2]))
        assert torch.equal(pooled, torch.zeros_like(pooled))

    def test_mean_pool_matches_direct_average(self, small_dataset, small_norm):
        torch.manual_seed(0)
        model = ReanalysisModel(tiny_config())
        batch = tiny_batch(small_dataset, small_norm)
        inputs = torch.as_tensor(batch.inputs[:2])
        tf = torch.as_tensor(batch.time_feats[:2])
        pooled = model.encode(inputs, tf)
        # independent route: run the submodules and average over time by hand
        z = model.lstm(model._stack_inputs(inputs, tf))
        z2 = model.attention(z)
        direct = z2.sum(dim=0) / z2.shape[0]
        b, _, t, n = inputs.shape
        assert torch.allclose(pooled, direct.view(b, n, -1), atol=1e-6)

    def test_constant_sequence_pools_to_itself(self):
        # mean over T of a T-constant latent is that constant
        model = ReanalysisModel(tiny_config())
        z2 = torch.randn(1, 3, 8).repeat(24, 1, 1)
        assert torch.allclose(z2.mean(dim=0), z2[0], atol=1e-7)


class TestPredictVisible:
    def test_zero_parameters_give_zero_predictions(self, small_dataset, small_norm):
        model = ReanalysisModel(tiny_config())
        with torch.no_grad():
            for p in model.parameters():
                p.zero_()
        batch = tiny_batch(small_dataset, small_norm)
        preds, _ = model.forward(batch.select([0]))
        assert torch.equal(preds, torch.zeros_like(preds))

    def test_output_shape_contract(self, small_dataset, small_norm):
        model = ReanalysisModel(tiny_config())
        batch = tiny_batch(small_dataset, small_norm)
        sub = batch.select([0, 1])
        n = sub.inputs.shape[3]
        preds, feats = model.forward(sub)
        assert preds.shape == (2, 6, n)
        assert feats.shape == (2, n, 8)

    def test_wrong_channel_count_rejected(self):
        model = ReanalysisModel(tiny_config())
        bad = torch.randn(1, 9, 24, 4)
        with pytest.raises(ValueError):
            model.predict_visible(bad, torch.randn(1, 6, 24))


class TestPredictHidden:
    def test_colocated_hidden_matches_visible(self, small_dataset, small_norm):
        torch.manual_seed(1)
        model = ReanalysisModel(tiny_config(k_neighbors=1))
        batch = tiny_batch(small_dataset, small_norm)
        sub = batch.select([0])
        inputs = torch.as_tensor(sub.inputs)
        tf = torch.as_tensor(sub.time_feats)
        preds, _ = model.predict_visible(inputs, tf)
        out = model.predict_at(inputs, tf, sub.station_coords,
                               sub.station_coords[2:3], k=1)
        assert torch.allclose(out[:, :, 0], preds[:, :, 2], atol=1e-6)

    def test_single_visible_station_broadcasts(self, small_dataset, small_norm):
        torch.manual_seed(2)
        model = ReanalysisModel(tiny_config(k_neighbors=1))
        one = [small_dataset[0]]
        batch = make_windows(one, small_norm, 24, 6, stride=200)
        sub = batch.select([0])
        inputs = torch.as_tensor(sub.inputs)
        tf = torch.as_tensor(sub.time_feats)
        preds, _ = model.predict_visible(inputs, tf)
        queries = np.array([[39.0, 115.0], [41.0, 119.0]])
        out = model.predict_at(inputs, tf, sub.station_coords, queries, k=1)
        for m in range(2):
            assert torch.allclose(out[:, :, m], preds[:, :, 0], atol=1e-7)

    def test_nan_hidden_coordinate_rejected(self, small_dataset, small_norm):
        model = ReanalysisModel(tiny_config())
        batch = tiny_batch(small_dataset, small_norm)
        sub = batch.select([0])
        with pytest.raises(ValueError, match="finite"):
            model.predict_at(torch.as_tensor(sub.inputs),
                             torch.as_tensor(sub.time_feats),
                             sub.station_coords, np.array([[np.nan, 116.0]]))

    @pytest.mark.parametrize("mode", ["inverse_distance", "learned_feature"])
    def test_hidden_loss_gradient_matches_finite_differences(
            self, mode, small_dataset, small_norm):
        torch.manual_seed(3)
        model = ReanalysisModel(tiny_config(knn_weight_mode=mode)).double()
        batch = tiny_batch(small_dataset, small_norm)
        sub = batch.select([0])
        inputs = torch.as_tensor(sub.inputs, dtype=torch.float64)
        tf = torch.as_tensor(sub.time_feats, dtype=torch.float64)
        hidden_coords = np.array([[40.1, 116.2], [39.3, 117.8]])
        target = torch.rand(1, 6, 2, dtype=torch.float64)
        mask = torch.ones_like(target, dtype=torch.bool)

        def loss_fn():
            out = model.predict_at(inputs, tf, sub.station_coords, hidden_coords)
            return masked_mse(out, target, mask)

        finite_difference_check(loss_fn, model.parameters(), n_samples=40)
