"""Checkpoint files: model parameters, normalization and optimizer state.

A checkpoint is a single ``.npz`` archive with raw float32 arrays plus a JSON
metadata record, so round-trips are bit-exact. Writes are atomic (tmp file +
rename); a corrupt file fails on load without leaving partial state.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import torch

from .network import ModelConfig, ReanalysisModel
from .stations import NormalizationSpec

FORMAT_VERSION = 1


def save_checkpoint(path, model: ReanalysisModel, norm: NormalizationSpec,
                    optimizer=None, extra: dict | None = None) -> None:
    path = Path(path)
    arrays = {}
    for name, p in model.state_dict().items():
        arrays[f"param/{name}"] = p.detach().cpu().numpy()
    opt_meta = None
    if optimizer is not None:
        opt_meta = []
        for i, (name, p) in enumerate(model.named_parameters()):
            state = optimizer.state.get(p, {})
            if "m" in state:
                arrays[f"opt_m/{name}"] = state["m"].cpu().numpy()
                arrays[f"opt_v/{name}"] = state["v"].cpu().numpy()
                opt_meta.append({"name": name, "step": state["step"]})
    meta = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "normalization": norm.to_dict(),
        "optimizer": opt_meta,
        "extra": extra or {},
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        np.savez(f, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path, optimizer_factory=None):
    """Load a checkpoint; returns (model, norm, optimizer_or_None, extra).

    ``optimizer_factory`` maps model parameters to a fresh optimizer whose
    moment tensors are then restored.
    """
    path = Path(path)
    try:
        with np.load(path) as z:
            arrays = {k: z[k] for k in z.files}
    except Exception as exc:
        raise ValueError(f"unreadable checkpoint {path}: {exc}") from exc
    if "meta" not in arrays:
        raise ValueError(f"checkpoint {path} has no metadata record")
    meta = json.loads(arrays["meta"].tobytes().decode())
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")

    config = ModelConfig.from_dict(meta["model_config"])
    model = ReanalysisModel(config)
    state = {k.removeprefix("param/"): torch.as_tensor(v)
             for k, v in arrays.items() if k.startswith("param/")}
    model.load_state_dict(state, strict=True)
    norm = NormalizationSpec.from_dict(meta["normalization"])

    optimizer = None
    if optimizer_factory is not None:
        optimizer = optimizer_factory(model)
        if meta["optimizer"]:
            steps = {d["name"]: d["step"] for d in meta["optimizer"]}
            for name, p in model.named_parameters():
                if f"opt_m/{name}" in arrays:
                    optimizer.state[p]["step"] = steps[name]
                    optimizer.state[p]["m"] = torch.as_tensor(arrays[f"opt_m/{name}"])
                    optimizer.state[p]["v"] = torch.as_tensor(arrays[f"opt_v/{name}"])
    return model, norm, optimizer, meta["extra"]
