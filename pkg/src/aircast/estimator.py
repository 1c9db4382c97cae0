"""Scikit-learn style front door for the reanalysis model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .network import ModelConfig
from .stations import NormalizationSpec, StationSeries, PM25
from .training import TrainConfig, train
from .windows import make_windows


def validate_series(series) -> list[StationSeries]:
    """Check that the input is a non-empty list of StationSeries with unique ids."""
    if not isinstance(series, (list, tuple)) or not series:
        raise ValueError("expected a non-empty list of StationSeries")
    for s in series:
        if not isinstance(s, StationSeries):
            raise TypeError(f"expected StationSeries, got {type(s).__name__}")
    ids = [s.meta.station_id for s in series]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate station ids in dataset")
    return list(series)


class ReanalysisRegressor(BaseEstimator, RegressorMixin):
    """Spatiotemporal PM2.5 regressor over a monitoring-station network.

    fit() takes a list of StationSeries, trains the LSTM-attention encoder end
    to end (including the differentiable kNN interpolation loss at held-out
    stations), and predict() returns denormalized PM2.5 forecasts for every
    input window, optionally interpolated at arbitrary coordinates.
    """

    def __init__(self, hidden_dim=64, n_heads=4, t_in=24, horizon=6,
                 k_neighbors=20, knn_weight_mode="inverse_distance",
                 use_time_features=True, lr=1e-3, batch_size=32,
                 max_iterations=2000, seed=0, hidden_fraction=0.1,
                 weight_decay=0.01, grad_clip=5.0, val_every=200,
                 min_valid_fraction=0.8):
        self.hidden_dim = hidden_dim
        self.n_heads = n_heads
        self.t_in = t_in
        self.horizon = horizon
        self.k_neighbors = k_neighbors
        self.knn_weight_mode = knn_weight_mode
        self.use_time_features = use_time_features
        self.lr = lr
        self.batch_size = batch_size
        self.max_iterations = max_iterations
        self.seed = seed
        self.hidden_fraction = hidden_fraction
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.val_every = val_every
        self.min_valid_fraction = min_valid_fraction

    def _model_config(self) -> ModelConfig:
        return ModelConfig(hidden_dim=self.hidden_dim, n_heads=self.n_heads,
                           t_in=self.t_in, horizon=self.horizon,
                           k_neighbors=self.k_neighbors,
                           knn_weight_mode=self.knn_weight_mode,
                           use_time_features=self.use_time_features).validate()

    def _train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, batch_size=self.batch_size,
                           max_iterations=self.max_iterations, seed=self.seed,
                           hidden_fraction=self.hidden_fraction,
                           weight_decay=self.weight_decay, grad_clip=self.grad_clip,
                           val_every=self.val_every,
                           min_valid_fraction=self.min_valid_fraction).validate()

    def fit(self, X, y=None, out_dir=None):
        series = validate_series(X)
        result = train(self._model_config(), self._train_config(), series, out_dir)
        self.model_ = result.model
        self.norm_ = result.norm
        self.train_log_ = result.log
        self.best_val_rmse_ = result.best_val_rmse
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted; call fit() first")

    def predict(self, X, query_coords=None, stride: int = 1) -> np.ndarray:
        """Denormalized PM2.5 forecasts [n_windows, horizon, n_stations] (or
        [n_windows, horizon, n_query] when coordinates are given)."""
        from .evaluation import predict_batched
        self._check_fitted()
        series = validate_series(X)
        batch = make_windows(series, self.norm_, self.t_in, self.horizon,
                             stride=stride)
        preds = predict_batched(self.model_, batch, query_coords=query_coords)
        return self.norm_.invert(preds.astype(np.float64), channel=PM25)

    def score(self, X, y=None, stride: int = 1) -> float:
        """Pooled R^2 over all windows, horizon steps and stations of X."""
        from .evaluation import metrics
        self._check_fitted()
        series = validate_series(X)
        batch = make_windows(series, self.norm_, self.t_in, self.horizon,
                             stride=stride)
        from .evaluation import predict_batched
        preds = predict_batched(self.model_, batch)
        m = batch.target_mask
        y_true = self.norm_.invert(batch.targets.astype(np.float64), channel=PM25)
        y_hat = self.norm_.invert(preds.astype(np.float64), channel=PM25)
        return metrics(y_true[m], y_hat[m]).r2

    def save(self, path):
        from .checkpoint import save_checkpoint
        self._check_fitted()
        save_checkpoint(path, self.model_, self.norm_)

    def load(self, path):
        from .checkpoint import load_checkpoint
        model, norm, _, _ = load_checkpoint(path)
        cfg = model.config
        self.set_params(hidden_dim=cfg.hidden_dim, n_heads=cfg.n_heads,
                        t_in=cfg.t_in, horizon=cfg.horizon,
                        k_neighbors=cfg.k_neighbors,
                        knn_weight_mode=cfg.knn_weight_mode,
                        use_time_features=cfg.use_time_features)
        self.model_ = model
        self.norm_ = norm
        return self
