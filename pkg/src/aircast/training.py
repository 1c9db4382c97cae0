"""End-to-end training with hidden-station masking and reproducible resume."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .evaluation import _pooled, predict_batched
from .interpolation import knn_interpolate
from .network import ModelConfig, ReanalysisModel
from .nn import AdamW, masked_mse
from .stations import NormalizationSpec, StationSeries, filter_complete
from .windows import WindowBatch, make_windows, split_chronological

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    max_iterations: int = 2000
    seed: int = 0
    hidden_fraction: float = 0.1
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    grad_clip: float = 5.0
    checkpoint_every: int = 0       # 0: checkpoint only at the end
    val_every: int = 200
    min_valid_fraction: float = 0.8
    split: tuple = (0.7, 0.15, 0.15)
    stride: int = 1
    val_stride: int = 4

    def validate(self) -> "TrainConfig":
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.hidden_fraction < 1.0:
            raise ValueError("hidden_fraction must be in [0, 1)")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        d["split"] = list(self.split)
        return d


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)

    def add(self, iteration, train_loss, val_mae, val_rmse, val_r2, wall_s):
        if self.rows and iteration <= self.rows[-1]["iteration"]:
            raise ValueError("log iterations must be strictly increasing")
        self.rows.append(dict(iteration=iteration, train_loss=train_loss,
                              val_mae=val_mae, val_rmse=val_rmse, val_r2=val_r2,
                              wall_s=wall_s))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


@dataclass
class TrainResult:
    model: ReanalysisModel
    norm: NormalizationSpec
    log: TrainLog
    best_val_rmse: float
    best_path: Path | None = None
    last_path: Path | None = None


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch])


def _prepare(model_cfg: ModelConfig, train_cfg: TrainConfig, series):
    usable = filter_complete(series, train_cfg.min_valid_fraction)
    train, val, test = split_chronological(usable, train_cfg.split)
    norm = NormalizationSpec.fit(train)
    train_batch = make_windows(train, norm, model_cfg.t_in, model_cfg.horizon,
                               stride=train_cfg.stride)
    val_batch = make_windows(val, norm, model_cfg.t_in, model_cfg.horizon,
                             stride=train_cfg.val_stride)
    if len(val_batch) == 0:
        raise ValueError("empty validation split")
    return norm, train_batch, val_batch


def _step_loss(model: ReanalysisModel, sub: WindowBatch, hidden_cols: np.ndarray,
               visible_cols: np.ndarray) -> torch.Tensor:
    """Visible-station MSE plus interpolated hidden-station MSE, equally weighted."""
    inputs = torch.as_tensor(sub.inputs[:, :, :, visible_cols])
    tf = torch.as_tensor(sub.time_feats)
    targets = torch.as_tensor(sub.targets)
    mask = torch.as_tensor(sub.target_mask)

    preds, pooled = model.predict_visible(inputs, tf)
    loss = masked_mse(preds, targets[:, :, visible_cols], mask[:, :, visible_cols])
    if hidden_cols.size:
        vis_coords = sub.target_coords[visible_cols]
        hid_coords = sub.target_coords[hidden_cols]
        k = min(model.config.k_neighbors, len(visible_cols))
        hid_preds = knn_interpolate(preds, vis_coords, hid_coords, k,
                                    mode=model.config.knn_weight_mode,
                                    features=pooled, temperature=model.log_tau.exp())
        hid_mask = mask[:, :, hidden_cols]
        if hid_mask.any():
            loss = loss + masked_mse(hid_preds, targets[:, :, hidden_cols], hid_mask)
    return loss


def _validate(model, norm, val_batch):
    preds = predict_batched(model, val_batch)
    rep = _pooled(val_batch.targets, preds, val_batch.target_mask, norm, "val", "val")
    return rep.mae, rep.rmse, rep.r2


def train(model_cfg: ModelConfig, train_cfg: TrainConfig,
          series: list[StationSeries], out_dir=None) -> TrainResult:
    """Train from scratch. Deterministic for a fixed seed and config."""
    return _run(model_cfg, train_cfg.validate(), series, out_dir,
                model=None, optimizer=None, start_iteration=0,
                best_val_rmse=float("inf"))


def resume(checkpoint_path, train_cfg: TrainConfig, series: list[StationSeries],
           out_dir=None) -> TrainResult:
    """Continue a run from its last checkpoint with exact optimizer state."""
    train_cfg.validate()
    model, norm, optimizer, extra = load_checkpoint(
        checkpoint_path,
        optimizer_factory=lambda m: AdamW(m.parameters(), lr=train_cfg.lr,
                                          betas=train_cfg.betas, eps=train_cfg.eps,
                                          weight_decay=train_cfg.weight_decay))
    stored = extra.get("train_config", {})
    for key in ("seed", "batch_size", "hidden_fraction", "stride"):
        if key in stored and stored[key] != getattr(train_cfg, key):
            raise ValueError(f"resume config mismatch on {key!r}: checkpoint has "
                             f"{stored[key]}, got {getattr(train_cfg, key)}")
    return _run(model.config, train_cfg, series, out_dir, model=model,
                optimizer=optimizer, start_iteration=int(extra["iteration"]),
                best_val_rmse=float(extra.get("best_val_rmse", float("inf"))))


def _run(model_cfg, train_cfg, series, out_dir, model, optimizer,
         start_iteration, best_val_rmse) -> TrainResult:
    torch.use_deterministic_algorithms(True)
    norm, train_batch, val_batch = _prepare(model_cfg, train_cfg, series)
    n_windows = len(train_batch)
    n_stations = train_batch.targets.shape[2]
    bpe = max(n_windows // train_cfg.batch_size, 1)
    n_hidden = int(round(train_cfg.hidden_fraction * n_stations))
    n_hidden = min(n_hidden, n_stations - 1)

    if model is None:
        torch.manual_seed(train_cfg.seed)
        model = ReanalysisModel(model_cfg)
    if optimizer is None:
        optimizer = AdamW(model.parameters(), lr=train_cfg.lr, betas=train_cfg.betas,
                          eps=train_cfg.eps, weight_decay=train_cfg.weight_decay)
    optimizer.set_param_names(model.named_parameters())

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    best_path = out_dir / "best.npz" if out_dir else None
    last_path = out_dir / "last.npz" if out_dir else None

    logbook = TrainLog()
    t0 = time.monotonic()
    perm = hidden_cols = visible_cols = None
    current_epoch = -1

    def save_last(iteration):
        if last_path is not None:
            save_checkpoint(last_path, model, norm, optimizer,
                            extra={"iteration": iteration,
                                   "best_val_rmse": best_val_rmse,
                                   "train_config": train_cfg.to_dict()})

    for it in range(start_iteration, train_cfg.max_iterations):
        epoch = it // bpe
        if epoch != current_epoch:
            current_epoch = epoch
            rng = _epoch_rng(train_cfg.seed, epoch)
            perm = rng.permutation(n_windows)
            hidden_cols = np.sort(rng.choice(n_stations, n_hidden, replace=False)) \
                if n_hidden else np.array([], dtype=int)
            visible_cols = np.setdiff1d(np.arange(n_stations), hidden_cols)
        pos = it % bpe
        idx = perm[pos * train_cfg.batch_size:(pos + 1) * train_cfg.batch_size]
        if idx.size == 0:
            idx = perm[:train_cfg.batch_size]

        model.train()
        loss = _step_loss(model, train_batch.select(idx), hidden_cols, visible_cols)
        loss_val = float(loss.detach())
        if not torch.isfinite(loss):
            raise RuntimeError(f"non-finite training loss at iteration {it}")
        optimizer.zero_grad()
        loss.backward()
        if train_cfg.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip)
        optimizer.step()

        last_it = it + 1 == train_cfg.max_iterations
        if (it + 1) % train_cfg.val_every == 0 or last_it:
            val_mae, val_rmse, val_r2 = _validate(model, norm, val_batch)
            logbook.add(it + 1, loss_val, val_mae, val_rmse, val_r2,
                        time.monotonic() - t0)
            log.info("iter %d  loss %.5f  val MAE %.2f RMSE %.2f R2 %.3f",
                     it + 1, loss_val, val_mae, val_rmse, val_r2)
            if val_rmse < best_val_rmse:
                best_val_rmse = val_rmse
                if best_path is not None:
                    save_checkpoint(best_path, model, norm, optimizer,
                                    extra={"iteration": it + 1,
                                           "best_val_rmse": best_val_rmse,
                                           "train_config": train_cfg.to_dict()})
        if (train_cfg.checkpoint_every and (it + 1) % train_cfg.checkpoint_every == 0) \
                or last_it:
            save_last(it + 1)

    if start_iteration >= train_cfg.max_iterations:
        save_last(start_iteration)
    if out_dir is not None:
        logbook.to_csv(out_dir / "train_log.csv")
    return TrainResult(model, norm, logbook, best_val_rmse, best_path, last_path)
