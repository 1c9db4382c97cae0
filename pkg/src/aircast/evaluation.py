"""Metrics, evaluation protocols, baselines and attention analytics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from .network import ReanalysisModel
from .stations import NormalizationSpec, StationSeries, PM25
from .windows import WindowBatch, make_windows, split_chronological

log = logging.getLogger(__name__)

SHORT_T_IN = 24
SHORT_HORIZONS = (6, 12, 24)
LONG_T_IN = 336
LONG_HORIZON_DAYS = (2, 4, 7)


@dataclass
class MetricReport:
    mae: float
    rmse: float
    r2: float
    n: int
    horizon: str = ""
    model: str = ""

    def __post_init__(self):
        assert self.rmse >= self.mae - 1e-12, "RMSE below MAE violates Jensen"


def metrics(y: np.ndarray, y_hat: np.ndarray, horizon: str = "", model: str = "") -> MetricReport:
    """MAE, RMSE and coefficient of determination for paired samples."""
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < 2:
        raise ValueError("need at least 2 samples")
    resid = y - y_hat
    mae = float(np.abs(resid).mean())
    rmse = float(np.sqrt((resid ** 2).mean()))
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined: target values are constant")
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot
    return MetricReport(mae, rmse, r2, y.size, horizon, model)


def predict_batched(model: ReanalysisModel, batch: WindowBatch, batch_size: int = 64,
                    query_coords=None, k: int | None = None) -> np.ndarray:
    """Inference over a window set; [B, H, N] (or [B, H, M] at query coords)."""
    model.eval()
    dtype = next(model.parameters()).dtype
    outs = []
    with torch.no_grad():
        for i in range(0, len(batch), batch_size):
            sub = batch.select(np.arange(i, min(i + batch_size, len(batch))))
            inputs = torch.as_tensor(sub.inputs, dtype=dtype)
            tf = torch.as_tensor(sub.time_feats, dtype=dtype)
            if query_coords is None:
                preds, _ = model.predict_visible(inputs, tf)
            else:
                preds = model.predict_at(inputs, tf, sub.station_coords, query_coords, k=k)
            outs.append(preds.numpy())
    return np.concatenate(outs)


def _pooled(y, y_hat, mask, norm, horizon, model_name, hours=None, daily=False):
    """Denormalize and pool (window x hour x station) samples into one report."""
    if hours is not None:
        y, y_hat, mask = y[:, :hours], y_hat[:, :hours], mask[:, :hours]
    y = norm.invert(np.asarray(y, dtype=np.float64), channel=PM25)
    y_hat = norm.invert(np.asarray(y_hat, dtype=np.float64), channel=PM25)
    if daily:
        b, h, n = y.shape
        days = h // 24
        y = y[:, :days * 24].reshape(b, days, 24, n).mean(axis=2)
        y_hat = y_hat[:, :days * 24].reshape(b, days, 24, n).mean(axis=2)
        mask = mask[:, :days * 24].reshape(b, days, 24, n).all(axis=2)
    m = np.asarray(mask, dtype=bool)
    return metrics(y[m], y_hat[m], horizon=horizon, model=model_name)


def eval_short_term(model: ReanalysisModel, norm: NormalizationSpec,
                    series: list[StationSeries], stride: int = 1,
                    model_name: str = "reanalysis-net") -> list[MetricReport]:
    """Hourly metrics at 6/12/24 h horizons from a 24 h input window."""
    if model.config.t_in != SHORT_T_IN:
        raise ValueError(f"short-term protocol requires t_in={SHORT_T_IN}, "
                         f"model has {model.config.t_in}")
    if model.config.horizon < max(SHORT_HORIZONS):
        raise ValueError(f"model horizon {model.config.horizon} < {max(SHORT_HORIZONS)}")
    batch = make_windows(series, norm, SHORT_T_IN, model.config.horizon, stride=stride)
    preds = predict_batched(model, batch)
    return [_pooled(batch.targets, preds, batch.target_mask, norm,
                    f"{h}h", model_name, hours=h) for h in SHORT_HORIZONS]


def eval_long_term(model: ReanalysisModel, norm: NormalizationSpec,
                   series: list[StationSeries], stride: int = 24,
                   model_name: str = "reanalysis-net") -> list[MetricReport]:
    """Daily-aggregated metrics at 2/4/7 day horizons from a 336 h window."""
    if model.config.t_in != LONG_T_IN:
        raise ValueError(f"long-term protocol requires t_in={LONG_T_IN}, "
                         f"model has {model.config.t_in}")
    if model.config.horizon < 24 * max(LONG_HORIZON_DAYS):
        raise ValueError(f"model horizon {model.config.horizon} < "
                         f"{24 * max(LONG_HORIZON_DAYS)}")
    batch = make_windows(series, norm, LONG_T_IN, model.config.horizon, stride=stride)
    preds = predict_batched(model, batch)
    return [_pooled(batch.targets, preds, batch.target_mask, norm,
                    f"{d}d", model_name, hours=24 * d, daily=True)
            for d in LONG_HORIZON_DAYS]


# ---------------------------------------------------------------------------
# baselines

BASELINES = ("linear_regression", "lstm_plain", "persistence")


def _flatten_per_station(batch: WindowBatch):
    """[B, C, T, N] -> per-station design matrix [B*N, C*T] and targets [B*N, H]."""
    b, c, t, n = batch.inputs.shape
    x = batch.inputs.transpose(0, 3, 1, 2).reshape(b * n, c * t)
    y = batch.targets.transpose(0, 2, 1).reshape(b * n, -1)
    m = batch.target_mask.transpose(0, 2, 1).reshape(b * n, -1)
    return x.astype(np.float64), y.astype(np.float64), m


def fit_window_regression(batch: WindowBatch, ridge: float = 1e-6):
    """Closed-form least squares from flattened windows to horizon targets."""
    x, y, m = _flatten_per_station(batch)
    keep = m.all(axis=1)
    x, y = x[keep], y[keep]
    a = np.hstack([x, np.ones((x.shape[0], 1))])
    gram = a.T @ a + ridge * np.eye(a.shape[1])
    cond = float(np.linalg.cond(gram))
    log.info("window regression: %d samples, condition number %.3e", len(a), cond)
    coef = np.linalg.solve(gram, a.T @ y)
    return coef, cond


def apply_window_regression(coef: np.ndarray, batch: WindowBatch) -> np.ndarray:
    b, c, t, n = batch.inputs.shape
    x, _, _ = _flatten_per_station(batch)
    a = np.hstack([x, np.ones((x.shape[0], 1))])
    return (a @ coef).reshape(b, n, -1).transpose(0, 2, 1)


def run_baseline(name: str, series: list[StationSeries], protocol: str = "short",
                 norm: NormalizationSpec | None = None, stride: int = 1,
                 lstm_iterations: int = 2000, seed: int = 0,
                 fractions=(0.7, 0.15, 0.15)) -> list[MetricReport]:
    """Fit a reference model on the chronological train split and report on test."""
    if name not in BASELINES:
        raise ValueError(f"unknown baseline {name!r}; choose from {BASELINES}")
    if protocol not in ("short", "long"):
        raise ValueError(f"unknown protocol {protocol!r}")
    t_in = SHORT_T_IN if protocol == "short" else LONG_T_IN
    horizon = max(SHORT_HORIZONS) if protocol == "short" else 24 * max(LONG_HORIZON_DAYS)

    train, _, test = split_chronological(series, fractions)
    norm = norm or NormalizationSpec.fit(train)
    test_batch = make_windows(test, norm, t_in, horizon, stride=stride)

    if name == "persistence":
        last = test_batch.inputs[:, PM25, -1, :]               # [B, N]
        preds = np.repeat(last[:, None, :], horizon, axis=1)
    elif name == "linear_regression":
        train_batch = make_windows(train, norm, t_in, horizon, stride=stride)
        coef, _ = fit_window_regression(train_batch)
        preds = apply_window_regression(coef, test_batch)
    else:
        preds = _fit_predict_plain_lstm(train, test_batch, norm, t_in, horizon,
                                        lstm_iterations, seed)

    if protocol == "short":
        return [_pooled(test_batch.targets, preds, test_batch.target_mask, norm,
                        f"{h}h", name, hours=h) for h in SHORT_HORIZONS]
    return [_pooled(test_batch.targets, preds, test_batch.target_mask, norm,
                    f"{d}d", name, hours=24 * d, daily=True)
            for d in LONG_HORIZON_DAYS]


def _fit_predict_plain_lstm(train, test_batch, norm, t_in, horizon, iterations, seed):
    """LSTM + affine head reference: no attention, no cyclic features, no kNN."""
    from .nn import LSTM, AdamW, masked_mse
    from .stations import POLLUTANTS

    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    batch = make_windows(train, norm, t_in, horizon, stride=1)
    lstm = LSTM(len(POLLUTANTS), 64)
    head = torch.nn.Linear(64, horizon)
    params = list(lstm.parameters()) + list(head.parameters())
    opt = AdamW(params, lr=1e-3)

    def forward(sub: WindowBatch):
        b, c, t, n = sub.inputs.shape
        x = torch.as_tensor(sub.inputs, dtype=torch.float32)
        x = x.permute(2, 0, 3, 1).reshape(t, b * n, c)
        z = lstm(x).mean(dim=0)
        return head(z).view(b, n, -1).permute(0, 2, 1)

    bs = 32
    for it in range(iterations):
        idx = rng.integers(0, len(batch), size=min(bs, len(batch)))
        sub = batch.select(idx)
        pred = forward(sub)
        loss = masked_mse(pred, torch.as_tensor(sub.targets, dtype=torch.float32),
                          torch.as_tensor(sub.target_mask))
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(params, 5.0)
        opt.step()

    outs = []
    with torch.no_grad():
        for i in range(0, len(test_batch), 64):
            sub = test_batch.select(np.arange(i, min(i + 64, len(test_batch))))
            outs.append(forward(sub).numpy())
    return np.concatenate(outs)


# ---------------------------------------------------------------------------
# attention analytics

@dataclass
class AttentionReport:
    head_weights: np.ndarray   # [n_heads, T, T] averaged over windows
    pca_coords: np.ndarray     # [n_heads, 2]
    clusters: np.ndarray       # [n_heads] cluster labels
    explained: np.ndarray      # [2] explained-variance shares


def pca_top2(x: np.ndarray):
    """Top-2 principal coordinates of row samples via covariance eigendecomposition.

    Solves the (dual) Gram eigenproblem, which shares nonzero eigenvalues with
    the feature covariance, so it stays exact for very wide samples.
    """
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=0, keepdims=True)
    gram = centered @ centered.T / max(len(x) - 1, 1)
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1][:2]
    evals = np.clip(evals[order], 0.0, None)
    coords = evecs[:, order] * np.sqrt(np.maximum(evals, 0.0) * max(len(x) - 1, 1))
    total = np.clip(np.trace(gram), 1e-300, None)
    return coords, evals / total


def attention_report(model: ReanalysisModel, batch: WindowBatch, seed: int = 0,
                     max_windows: int = 64) -> AttentionReport:
    """Average per-head attention maps with PCA coordinates and 2-means labels."""
    from sklearn.cluster import KMeans

    if model.config.n_heads < 2:
        raise ValueError("attention report requires at least 2 heads")
    if model.config.t_in < 3:
        raise ValueError("attention PCA requires t_in >= 3")
    model.eval()
    dtype = next(model.parameters()).dtype
    total = None
    count = 0
    with torch.no_grad():
        for i in range(0, min(len(batch), max_windows), 16):
            sub = batch.select(np.arange(i, min(i + 16, len(batch), max_windows)))
            inputs = torch.as_tensor(sub.inputs, dtype=dtype)
            tf = torch.as_tensor(sub.time_feats, dtype=dtype)
            _, w = model.encode(inputs, tf, return_attention=True)  # [B, N, h, T, T]
            total = w.sum(dim=(0, 1)) if total is None else total + w.sum(dim=(0, 1))
            count += w.shape[0] * w.shape[1]
    head_weights = (total / count).numpy()

    flat = head_weights.reshape(model.config.n_heads, -1)
    coords, explained = pca_top2(flat)
    labels = KMeans(n_clusters=2, n_init=1, random_state=seed).fit_predict(coords)
    return AttentionReport(head_weights, coords, labels, explained)


# ---------------------------------------------------------------------------
# hidden-station error maps

@dataclass
class StationError:
    station_id: str
    lat: float
    lon: float
    mae: float
    rmse: float
    n: int


def hidden_station_errors(model: ReanalysisModel, norm: NormalizationSpec,
                          series: list[StationSeries], hidden_ids: set,
                          stride: int = 1, k: int | None = None) -> list[StationError]:
    """Per-hidden-station MAE/RMSE of interpolated predictions vs held-out truth."""
    if not hidden_ids:
        return []
    batch = make_windows(series, norm, model.config.t_in, model.config.horizon,
                         stride=stride, hidden_station_ids=hidden_ids)
    hidden_coords = batch.target_coords[batch.hidden_idx]
    preds = predict_batched(model, batch, query_coords=hidden_coords, k=k)
    y = norm.invert(batch.targets[:, :, batch.hidden_idx].astype(np.float64), channel=PM25)
    y_hat = norm.invert(preds.astype(np.float64), channel=PM25)
    mask = batch.target_mask[:, :, batch.hidden_idx]

    out, skipped = [], 0
    for j, t_idx in enumerate(batch.hidden_idx):
        m = mask[:, :, j]
        if m.sum() < 2:
            skipped += 1
            continue
        resid = y[:, :, j][m] - y_hat[:, :, j][m]
        out.append(StationError(
            station_id=batch.target_ids[t_idx],
            lat=float(hidden_coords[j, 0]), lon=float(hidden_coords[j, 1]),
            mae=float(np.abs(resid).mean()),
            rmse=float(np.sqrt((resid ** 2).mean())),
            n=int(m.sum())))
    if skipped:
        log.warning("skipped %d hidden stations without test-split truth", skipped)
    return out


# ---------------------------------------------------------------------------
# report formatting

def format_table(reports: dict[str, list[MetricReport]], protocol: str) -> str:
    """Aligned text table: one model per row, one horizon per column group."""
    horizons = [f"{h}h" for h in SHORT_HORIZONS] if protocol == "short" \
        else [f"{d}d" for d in LONG_HORIZON_DAYS]
    cols = ["R2", "MAE", "RMSE"] if protocol == "short" else ["MAE", "RMSE"]
    header = ["model"] + [f"{h} {c}" for h in horizons for c in cols]
    lines = ["  ".join(f"{c:>12}" for c in header)]
    for name, reps in reports.items():
        by_h = {r.horizon: r for r in reps}
        row = [name]
        for h in horizons:
            r = by_h[h]
            vals = ([f"{r.r2:.4f}"] if protocol == "short" else []) \
                + [f"{r.mae:.2f}", f"{r.rmse:.2f}"]
            row.extend(vals)
        lines.append("  ".join(f"{c:>12}" for c in row))
    return "\n".join(lines)


def reports_to_csv(reports: dict[str, list[MetricReport]], path) -> None:
    import pandas as pd
    rows = [{"model": r.model or name, "horizon": r.horizon, "mae": r.mae,
             "rmse": r.rmse, "r2": r.r2, "n": r.n}
            for name, reps in reports.items() for r in reps]
    pd.DataFrame(rows).to_csv(path, index=False)
