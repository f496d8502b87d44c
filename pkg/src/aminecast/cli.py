"""Command-line front end: synth, ingest, train, tune, evaluate, forecast,
sweep, and serve.

Training options come from CLI flags, an optional flat key=value config
file, and AMINECAST_* environment variables, in increasing precedence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from . import causal, synthplant
from .architectures import param_count
from .features import FeatureConfig
from .forecast import forecast, result_to_csv_rows
from .ingest import PlantSchema, fill_missing, load_csv
from .registry import Registry, RegistryError
from .training import (
    ColumnScaler,
    TrainConfig,
    default_space,
    fit_forecaster,
    metrics,
    tune,
)

ENV_PREFIX = "AMINECAST_"

# Long architecture names are accepted as aliases for the short ids.
ARCH_ALIASES = {
    "basiclstm": "basic",
    "stackedlstm": "stacked",
    "bilstm": "bi",
    "convlstm": "conv",
}


def normalize_arch(name: str) -> str:
    lowered = name.lower()
    return ARCH_ALIASES.get(lowered, lowered)

# Keys accepted in the flat training config file and as env overrides.
CONFIG_KEYS = {
    "batch_size": int,
    "max_epochs": int,
    "patience": int,
    "learning_rate": float,
    "seed": int,
    "deterministic": lambda v: v.lower() in ("1", "true", "yes"),
    "clip_norm": float,
}


class CliError(Exception):
    pass


def read_config_file(path: str | Path) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise CliError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = CONFIG_KEYS[key](raw.strip())
    return values


def env_overrides() -> dict:
    values: dict = {}
    for key, cast in CONFIG_KEYS.items():
        raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = cast(raw)
    return values


def build_train_config(args) -> TrainConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    values.update(env_overrides())
    return TrainConfig(**values)


def _registry(args) -> Registry:
    return Registry(args.registry)


def cmd_synth(args) -> int:
    config = synthplant.GeneratorConfig.default(seed=args.seed, days=args.days)
    frame = synthplant.generate(config)
    registry = _registry(args)
    dataset_id = args.id or registry.next_dataset_id()
    entry = registry.add_dataset(dataset_id, frame)
    sidecar = registry.root / f"datasets/{dataset_id}.provenance.json"
    sidecar.write_text(synthplant.config_to_json(config))
    print(f"dataset {entry.id}: {entry.rows} rows at {entry.interval_s} s "
          f"({entry.start} .. {entry.end})")
    return 0


def cmd_ingest(args) -> int:
    frame = load_csv(args.csv, PlantSchema.default())
    frame, filled = fill_missing(frame)
    registry = _registry(args)
    dataset_id = args.id or registry.next_dataset_id(Path(args.csv).stem)
    entry = registry.add_dataset(dataset_id, frame)
    print(f"dataset {entry.id}: {entry.rows} rows, {filled} cells interpolated")
    return 0


def _feature_config(frame_interval: int, args) -> FeatureConfig:
    return FeatureConfig.for_interval(
        frame_interval,
        input_window=args.window,
        include_target_lags=args.target_lags,
    )


def cmd_train(args) -> int:
    registry = _registry(args)
    frame = registry.get_dataset(args.dataset)
    schema = PlantSchema.default()
    train_config = build_train_config(args)
    feature_config = _feature_config(frame.interval_s, args)
    trained, result = fit_forecaster(
        frame,
        schema.input_columns,
        args.target,
        normalize_arch(args.arch),
        feature_config,
        train_config,
        hidden=args.hidden,
        layers=args.layers,
        kernel=args.kernel,
    )
    model_id = args.id or registry.next_model_id(args.target, normalize_arch(args.arch))
    registry.add_model(model_id, trained)
    log_path = registry.root / f"models/{model_id}.train.log"
    with log_path.open("w") as fh:
        for record in result.history:
            fh.write(json.dumps(
                {"epoch": record.epoch, "train_loss": record.train_loss,
                 "val_loss": record.val_loss}) + "\n")
    print(f"model {model_id}: {param_count(trained.descriptor)} parameters, "
          f"best val MSE {result.best_val_loss:.6g} at epoch {result.best_epoch}")
    return 0


def cmd_tune(args) -> int:
    registry = _registry(args)
    frame = registry.get_dataset(args.dataset)
    schema = PlantSchema.default()
    train_config = build_train_config(args)
    feature_config = _feature_config(frame.interval_s, args)
    arch = normalize_arch(args.arch)
    spec = default_space(arch, seed=train_config.seed,
                         budget=args.budget, design=args.design)
    trained, result, search = tune(
        frame, schema.input_columns, args.target, arch,
        feature_config, train_config, spec, folds=args.folds,
    )
    model_id = args.id or registry.next_model_id(args.target, arch)
    registry.add_model(model_id, trained)
    trace_path = registry.root / f"models/{model_id}.hyperopt.jsonl"
    with trace_path.open("w") as fh:
        for entry in search.trace:
            fh.write(json.dumps({
                "config": entry.config,
                "objective": entry.value,
                "incumbent": entry.incumbent_value,
                "timestamp": time.time(),
            }) + "\n")
    print(f"model {model_id}: best config {search.best_config}, "
          f"CV MSE {search.best_value:.6g}")
    return 0


def cmd_evaluate(args) -> int:
    registry = _registry(args)
    model = registry.get_model(args.model)
    frame = registry.get_dataset(args.dataset)
    horizon = args.horizon or min(864, len(frame) - args.start if args.start else 864)
    warm = model.feature_config.warmup_rows + model.feature_config.input_window
    start = args.start if args.start else max(warm, len(frame) - horizon)
    result = forecast(model, frame, start, horizon, args.mode)
    scaler = ColumnScaler.from_state(model.scaler, model.target)
    report = metrics(result.predicted, result.actual, scaler)
    print(f"model {args.model} on {args.dataset} "
          f"(rows {start}..{start + horizon}, {args.mode}):")
    print(f"  MSE  {report.mse:.6g}")
    print(f"  RMSE {report.rmse:.6g}")
    print(f"  MAE  {report.mae:.6g}")
    print(f"  MAPE {'undefined' if report.mape_pct is None else f'{report.mape_pct:.4g}%'}")
    print(f"  R2   {'undefined' if report.r2 is None else f'{report.r2:.6g}'}")
    registry.update_model_metrics(args.model, {
        "MSE": report.mse, "RMSE": report.rmse, "MAE": report.mae,
        "MAPE_pct": report.mape_pct, "R2": report.r2, "n": report.n,
        "dataset": args.dataset, "mode": args.mode,
    })
    return 0


def cmd_forecast(args) -> int:
    registry = _registry(args)
    model = registry.get_model(args.model)
    frame = registry.get_dataset(args.dataset)
    result = forecast(model, frame, args.start, args.horizon, args.mode)
    out = Path(args.out)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "predicted", "actual"])
        writer.writerows(result_to_csv_rows(result))
    print(f"wrote {len(result)} forecast rows to {out}")
    return 0


def cmd_sweep(args) -> int:
    registry = _registry(args)
    model = registry.get_model(args.model)
    frame = registry.get_dataset(args.dataset)
    if args.pair:
        grid = causal.sweep_pair(model, frame, args.pair[0], args.pair[1],
                                 args.start, args.length)
    else:
        features = (args.feature,) if args.feature else None
        grid = causal.sweep_single(model, frame, args.start, args.length, features)
    Path(args.out).write_text(causal.grid_to_csv(grid))
    cells = grid.cells.size
    if args.json:
        Path(args.json).write_text(causal.grid_to_json(grid))
        print(f"wrote {cells}-cell grid to {args.out} and {args.json}")
    else:
        print(f"wrote {cells}-cell grid to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    registry = _registry(args)
    app = create_app(registry, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value training config file")
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--max-epochs", dest="max_epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--clip-norm", dest="clip_norm", type=float)
    parser.add_argument("--hidden", type=int, default=32)
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--kernel", type=int, default=3)
    parser.add_argument("--window", type=int, default=12,
                        help="input window length W in steps")
    parser.add_argument("--target-lags", action="store_true",
                        help="feed lagged target values as inputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aminecast",
        description="Forecasting and what-if analysis for capture-plant telemetry",
    )
    parser.add_argument("--registry", default="registry",
                        help="registry directory (default ./registry)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--days", type=float, default=23.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--id")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="load a telemetry CSV into the registry")
    p.add_argument("--csv", required=True)
    p.add_argument("--id")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train one forecaster")
    p.add_argument("--dataset", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--arch", default="basic",
                   choices=["basic", "stacked", "bi", "conv",
                            "basiclstm", "stackedlstm", "bilstm", "convlstm"])
    p.add_argument("--id")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="Bayesian hyperparameter search, then train")
    p.add_argument("--dataset", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--arch", default="basic",
                   choices=["basic", "stacked", "bi", "conv",
                            "basiclstm", "stackedlstm", "bilstm", "convlstm"])
    p.add_argument("--budget", type=int, default=12)
    p.add_argument("--design", type=int, default=5)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--id")
    _add_train_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="score a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--horizon", type=int, default=0)
    p.add_argument("--mode", choices=["exogenous", "autoregressive"], default="exogenous")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("forecast", help="write a forecast CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--mode", choices=["exogenous", "autoregressive"], default="exogenous")
    p.add_argument("--out", default="forecast.csv")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("sweep", help="single or pair intervention sweep")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--feature", help="restrict the single sweep to one feature")
    p.add_argument("--pair", nargs=2, metavar=("FEATURE_A", "FEATURE_B"))
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--length", type=int, default=576,
                   help="evaluation window length in steps (default 2 days at 300 s)")
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", help="serve a built UI from this directory")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RegistryError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # surface engine errors as clean diagnostics
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
