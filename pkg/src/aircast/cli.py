"""Command-line entry point: synth, train, eval, reanalyze."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import fields
from pathlib import Path

from .stations import DataError

VERSION = "0.1.0"


def _read_config(path: str | None, required: bool = True) -> dict:
    if path is None:
        if required:
            raise DataError("--config is required for this command")
        return {}
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"config {p} is not valid JSON: {exc}") from exc


def _config_hash(path: str | None) -> str:
    if path is None:
        return "-"
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _from_section(cfg: dict, section: str, cls):
    """Build a dataclass from a config section; unknown keys are an error."""
    if section not in cfg:
        raise DataError(f"missing config key '{section}'")
    known = {f.name for f in fields(cls)}
    body = cfg[section]
    unknown = set(body) - known
    if unknown:
        raise DataError(f"unknown keys in '{section}': {sorted(unknown)}")
    obj = cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in body.items()})
    return obj.validate()


def _write_manifest(out_dir: Path, command: str, args, t0: float, outputs: list):
    manifest = {
        "command": command,
        "config_hash": _config_hash(getattr(args, "config", None)),
        "seed": getattr(args, "seed", None),
        "inputs": [str(v) for v in [getattr(args, "data", None),
                                    getattr(args, "checkpoint", None),
                                    getattr(args, "config", None)] if v],
        "outputs": sorted(str(p) for p in outputs),
        "version": VERSION,
        "wall_s": round(time.monotonic() - t0, 3),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _load_data(path: str):
    from .stations import load_stations
    p = Path(path)
    if not p.exists():
        raise DataError(f"data path not found: {p}")
    return load_stations(p)


def cmd_synth(args) -> None:
    from .stations import save_stations
    from .synthetic import SynthConfig, synth_dataset

    cfg = _read_config(args.config, required=False)
    known = {f.name for f in fields(SynthConfig)}
    unknown = set(cfg) - known
    if unknown:
        raise DataError(f"unknown synth config keys: {sorted(unknown)}")
    config = SynthConfig(**cfg)
    if args.seed is not None:
        config.seed = args.seed
    config.validate()

    t0 = time.monotonic()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series = synth_dataset(config=config)
    target = out / "stations.csv"
    save_stations(series, target)
    (out / "synth_config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    _write_manifest(out, "synth", args, t0, [target, out / "synth_config.json"])
    print(f"wrote {len(series)} stations x {series[0].n_hours} h to {target}")


def cmd_train(args) -> None:
    from .network import ModelConfig
    from .training import TrainConfig, train, resume

    cfg = _read_config(args.config)
    model_cfg = _from_section(cfg, "model", ModelConfig)
    train_cfg = _from_section(cfg, "train", TrainConfig)
    if args.seed is not None:
        train_cfg.seed = args.seed
    series = _load_data(args.data)

    t0 = time.monotonic()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.checkpoint:
        result = resume(args.checkpoint, train_cfg, series, out_dir=out)
    else:
        result = train(model_cfg, train_cfg, series, out_dir=out)
    _write_manifest(out, "train", args, t0,
                    [p for p in (result.best_path, result.last_path,
                                 out / "train_log.csv") if p])
    last = result.log.rows[-1] if result.log.rows else {}
    print(f"trained to iteration {last.get('iteration', 0)}; "
          f"best val RMSE {result.best_val_rmse:.3f}; checkpoints in {out}")


def cmd_eval(args) -> None:
    from .checkpoint import load_checkpoint
    from . import evaluation as ev

    model, norm, _, _ = load_checkpoint(args.checkpoint)
    series = _load_data(args.data)
    if args.protocol not in ("short", "long"):
        raise DataError(f"--protocol must be 'short' or 'long', got {args.protocol}")

    t0 = time.monotonic()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .windows import split_chronological
    _, _, test = split_chronological(series)
    run = ev.eval_short_term if args.protocol == "short" else ev.eval_long_term
    reports = {"reanalysis-net": run(model, norm, test, stride=args.stride)}
    if args.baselines:
        for name in ev.BASELINES:
            reports[name] = ev.run_baseline(name, series, protocol=args.protocol,
                                            stride=args.stride, seed=args.seed or 0)
    table = ev.format_table(reports, args.protocol)
    (out / "report.txt").write_text(table + "\n")
    ev.reports_to_csv(reports, out / "report.csv")
    outputs = [out / "report.txt", out / "report.csv"]

    if args.attention:
        import numpy as np
        import pandas as pd
        from .windows import make_windows
        batch = make_windows(test, norm, model.config.t_in, model.config.horizon,
                             stride=max(args.stride, 1))
        rep = ev.attention_report(model, batch)
        rows = [{"head": h, "row": i, **{f"t{j}": rep.head_weights[h, i, j]
                                         for j in range(rep.head_weights.shape[2])}}
                for h in range(rep.head_weights.shape[0])
                for i in range(rep.head_weights.shape[1])]
        pd.DataFrame(rows).to_csv(out / "attention.csv", index=False)
        pd.DataFrame({"head": np.arange(len(rep.clusters)),
                      "pc1": rep.pca_coords[:, 0], "pc2": rep.pca_coords[:, 1],
                      "cluster": rep.clusters}).to_csv(out / "attention_clusters.csv",
                                                       index=False)
        outputs += [out / "attention.csv", out / "attention_clusters.csv"]

    if args.hidden_ids:
        import pandas as pd
        hidden = set(args.hidden_ids.split(","))
        errs = ev.hidden_station_errors(model, norm, test, hidden, stride=args.stride)
        pd.DataFrame([e.__dict__ for e in errs]).to_csv(out / "hidden_errors.csv",
                                                        index=False)
        outputs.append(out / "hidden_errors.csv")

    _write_manifest(out, "eval", args, t0, outputs)
    print(table)


def cmd_reanalyze(args) -> None:
    from .checkpoint import load_checkpoint
    from . import grid as g

    model, norm, _, _ = load_checkpoint(args.checkpoint)
    series = _load_data(args.data)
    try:
        bbox = tuple(float(v) for v in args.bbox.split(","))
        assert len(bbox) == 4
    except Exception:
        raise DataError(f"--bbox must be lat0,lon0,lat1,lon1, got {args.bbox!r}")
    try:
        k_list = [int(v) for v in args.k.split(",")]
        assert all(v >= 1 for v in k_list)
    except Exception:
        raise DataError(f"--k must be a comma list of positive ints, got {args.k!r}")

    t0 = time.monotonic()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for k in k_list:
        grid = g.reanalyze_grid(model, norm, series, bbox, args.resolution, k=k,
                                checkpoint_id=Path(args.checkpoint).name)
        for suffix, writer in (("csv", g.grid_to_csv), ("txt", g.grid_to_text),
                               ("png", g.grid_heatmap)):
            path = out / f"grid_k{k}.{suffix}"
            writer(grid, path)
            outputs.append(path)
    pred_path = out / "station_predictions.csv"
    g.station_predictions_csv(model, norm, series, pred_path,
                              stride=max(args.stride, 1))
    outputs.append(pred_path)
    _write_manifest(out, "reanalyze", args, t0, outputs)
    print(f"wrote {len(k_list)} grids to {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aircast",
                                     description="Spatiotemporal PM2.5 reanalysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic station dataset")
    p.add_argument("--config", help="JSON synth config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the reanalysis model")
    p.add_argument("--config", required=True, help="JSON with 'model' and 'train' sections")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", help="resume from this checkpoint")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run an evaluation protocol on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--protocol", choices=["short", "long"], required=True)
    p.add_argument("--baselines", action="store_true")
    p.add_argument("--attention", action="store_true")
    p.add_argument("--hidden-ids", help="comma list of station ids to score as hidden")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reanalyze", help="export gridded reanalysis maps")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bbox", required=True, help="lat0,lon0,lat1,lon1")
    p.add_argument("--resolution", type=float, required=True, help="degrees")
    p.add_argument("--k", default="20", help="comma list of neighbour counts")
    p.add_argument("--stride", type=int, default=24)
    p.set_defaults(func=cmd_reanalyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (DataError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
