"""Training loop, metric suite, forward-chaining CV, and Bayesian tuning.

Error metrics follow the reporting convention of normalized-target models:
MSE/RMSE/MAE are computed on min-max scaled residuals, while MAPE and the
coefficient of determination are computed on original-scale values after
inverse transformation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import neuralcore as nc
from .architectures import ModelDescriptor, TrainedModel, _ModelBase, build
from .features import (
    FeatureConfig,
    ScalerState,
    WindowedDataset,
    build_matrix,
    engineer,
    feature_column_order,
    fit_scaler,
    scaled_target,
    window,
)
from .ingest import TimeSeriesFrame, chronological_split


class TrainingError(Exception):
    pass


class TrainingDivergedError(TrainingError):
    """Loss became non-finite; learning rate or clipping needs attention."""


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    learning_rate: float = 1e-3
    seed: int = 0
    deterministic: bool = True
    clip_norm: float = 5.0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise TrainingError("batch_size must be >= 1")
        if self.patience < 1:
            raise TrainingError("patience must be >= 1")
        if self.max_epochs < 1:
            raise TrainingError("max_epochs must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    model: _ModelBase
    history: list[EpochRecord]
    best_epoch: int
    best_val_loss: float


def _eval_mse(model: _ModelBase, dataset: WindowedDataset, batch_size: int = 512) -> float:
    total = 0.0
    n = len(dataset)
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        x, y = dataset.batch(idx)
        pred = model.predict(x)
        total += float(((pred - y) ** 2).sum())
    return total / n


def train(
    model: _ModelBase,
    train_set: WindowedDataset,
    val_set: WindowedDataset,
    config: TrainConfig,
) -> TrainResult:
    """Minimize MSE on scaled targets with Adam and early stopping.

    Restores the weights of the best validation epoch; stops after
    `patience` consecutive epochs without improvement.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise TrainingError("train and validation sets must be non-empty")
    if train_set.width != model.descriptor.input_dim:
        raise TrainingError(
            f"dataset width {train_set.width} != model input_dim {model.descriptor.input_dim}"
        )
    if len(train_set.timestamps) and len(val_set.timestamps):
        if val_set.timestamps[0] <= train_set.timestamps[-1]:
            raise TrainingError("validation samples must follow training samples in time")

    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    optimizer = nc.Adam(params, lr=config.learning_rate)
    history: list[EpochRecord] = []
    best_val = math.inf
    best_epoch = 0
    best_weights = model.weight_arrays()
    stale_epochs = 0

    n = len(train_set)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            x, y = train_set.batch(idx)
            pred = model.forward(x)
            loss = nc.mse_loss(pred, y)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch} (lr={config.learning_rate})"
                )
            epoch_loss += value * len(idx)
            optimizer.zero_grad()
            loss.backward()
            if config.clip_norm > 0:
                nc.clip_grad_norm(params, config.clip_norm)
            optimizer.step()
        val_loss = _eval_mse(model, val_set)
        history.append(EpochRecord(epoch, epoch_loss / n, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_weights = model.weight_arrays()
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= config.patience:
                break

    model.load_weight_arrays(best_weights)
    return TrainResult(model, history, best_epoch, best_val)


@dataclass(frozen=True)
class MetricsReport:
    """MSE/RMSE/MAE on scaled residuals; MAPE and R2 on original units.

    `mape_pct` is None when any actual is within 1e-9 of zero; `r2` is None
    when the actual series is constant. Both cases are named in `notes`.
    """

    mse: float
    rmse: float
    mae: float
    mape_pct: float | None
    r2: float | None
    n: int
    notes: tuple[str, ...] = ()


class _IdentityScaler:
    def transform(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64)


class ColumnScaler:
    """Single-column view of a fitted min-max scaler."""

    def __init__(self, low: float, high: float):
        if not high > low:
            raise TrainingError("scaler bounds must satisfy high > low")
        self.low = float(low)
        self.high = float(high)

    @classmethod
    def from_state(cls, scaler: ScalerState, column: str) -> "ColumnScaler":
        low, high = scaler.bounds(column)
        return cls(low, high)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.low) / (self.high - self.low)

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * (self.high - self.low) + self.low


IDENTITY_SCALER = _IdentityScaler()


def metrics(pred, actual, scaler=None) -> MetricsReport:
    """Score an original-scale prediction/actual pair."""
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.ndim != 1:
        raise TrainingError(f"prediction {pred.shape} and actual {actual.shape} must match")
    n = len(pred)
    if n < 2:
        raise TrainingError("metrics need at least 2 points")
    scaler = scaler if scaler is not None else IDENTITY_SCALER

    pred_s = scaler.transform(pred)
    actual_s = scaler.transform(actual)
    residual = pred_s - actual_s
    mse = float(np.mean(residual**2))
    rmse = math.sqrt(mse)
    mae = float(np.mean(np.abs(residual)))

    notes: list[str] = []
    if np.min(np.abs(actual)) <= 1e-9:
        mape = None
        notes.append("mape undefined: actual value within 1e-9 of zero")
    else:
        mape = float(100.0 * np.mean(np.abs(pred - actual) / np.abs(actual)))

    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = None
        notes.append("r2 undefined: constant actual series")
    else:
        r2 = 1.0 - float(np.sum((pred - actual) ** 2)) / ss_tot

    return MetricsReport(mse, rmse, mae, mape, r2, n, tuple(notes))


# ---------------------------------------------------------------------------
# Supervised data preparation shared by the trainer, CV and the CLI.
# ---------------------------------------------------------------------------


@dataclass
class PreparedData:
    train: WindowedDataset
    val: WindowedDataset
    test: WindowedDataset
    scaler: ScalerState
    feature_config: FeatureConfig
    input_columns: tuple[str, ...]
    target: str
    width: int


def prepare_supervised(
    frame: TimeSeriesFrame,
    input_columns: Sequence[str],
    target: str,
    config: FeatureConfig,
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
) -> PreparedData:
    """Split chronologically, fit the scaler on the training rows only, and
    window the full engineered matrix into train/val/test sample sets.
    """
    config.validate_for_interval(frame.interval_s)
    warmup = config.warmup_rows
    w = config.input_window
    min_rows = warmup + w + 1
    train_frame, val_frame, _ = chronological_split(frame, fractions, min_rows=min_rows)
    train_end = len(train_frame)
    val_end = train_end + len(val_frame)

    engineered = engineer(frame, input_columns, config, target)
    order = feature_column_order(input_columns, config, target)
    scaler = fit_scaler(engineered.slice_rows(0, train_end), list(order) + [target])

    matrix = build_matrix(frame, config, scaler, input_columns, target)
    targets = scaled_target(frame, target, scaler, warmup)
    full = window(matrix, targets, w, target)

    # Sample i predicts frame row warmup + w + i; bucket samples by that row.
    target_rows = warmup + w + np.arange(len(full))
    train_mask = target_rows < train_end
    val_mask = (target_rows >= train_end) & (target_rows < val_end)
    test_mask = target_rows >= val_end

    def subset(mask: np.ndarray) -> WindowedDataset:
        idx = np.flatnonzero(mask)
        return WindowedDataset(
            matrix_values=full.matrix_values[idx],
            targets=full.targets[idx],
            timestamps=full.timestamps[idx],
            target_name=target,
            window=w,
        )

    return PreparedData(
        train=subset(train_mask),
        val=subset(val_mask),
        test=subset(test_mask),
        scaler=scaler,
        feature_config=config,
        input_columns=tuple(input_columns),
        target=target,
        width=full.width,
    )


def fit_forecaster(
    frame: TimeSeriesFrame,
    input_columns: Sequence[str],
    target: str,
    architecture: str,
    feature_config: FeatureConfig,
    train_config: TrainConfig,
    hidden: int = 32,
    layers: int = 2,
    kernel: int = 3,
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
) -> tuple[TrainedModel, TrainResult]:
    """End-to-end convenience: prepare data, build, train, package."""
    prepared = prepare_supervised(frame, input_columns, target, feature_config, fractions)
    descriptor = ModelDescriptor(
        architecture=architecture,
        input_dim=prepared.width,
        hidden=hidden,
        layers=layers if architecture == "stacked" else 1,
        kernel=kernel,
    )
    model = build(descriptor, seed=train_config.seed)
    result = train(model, prepared.train, prepared.val, train_config)
    trained = TrainedModel(
        descriptor=descriptor,
        model=model,
        target=target,
        input_columns=prepared.input_columns,
        interval_s=frame.interval_s,
        feature_config=feature_config,
        scaler=prepared.scaler,
        metadata={
            "seed": train_config.seed,
            "epochs_run": len(result.history),
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
            "data_span": [int(frame.start), int(frame.end)],
            "rows": len(frame),
        },
    )
    return trained, result


# ---------------------------------------------------------------------------
# Forward-chaining cross-validation.
# ---------------------------------------------------------------------------


def cv_boundaries(n_rows: int, folds: int) -> list[tuple[int, int]]:
    """Expanding-window folds over the second half of the rows.

    Validation block i covers [n/2 + i*n/(2k), n/2 + (i+1)*n/(2k)); the last
    block absorbs the remainder. Training always covers [0, block start).
    """
    if folds < 2:
        raise TrainingError("cross-validation needs at least 2 folds")
    half = n_rows // 2
    block = half // folds
    if block < 1:
        raise TrainingError(f"{n_rows} rows cannot form {folds} folds")
    bounds = []
    for i in range(folds):
        start = half + i * block
        end = half + (i + 1) * block if i < folds - 1 else n_rows
        bounds.append((start, end))
    return bounds


@dataclass
class CvResult:
    mean_val_mse: float
    fold_mse: list[float]
    boundaries: list[tuple[int, int]]


def forward_chain_cv(
    frame: TimeSeriesFrame,
    input_columns: Sequence[str],
    target: str,
    template: ModelDescriptor,
    feature_config: FeatureConfig,
    config: TrainConfig,
    folds: int = 3,
) -> CvResult:
    """Chronological expanding-window CV; never shuffles rows across time."""
    feature_config.validate_for_interval(frame.interval_s)
    warmup = feature_config.warmup_rows
    w = feature_config.input_window
    engineered = engineer(frame, input_columns, feature_config, target)
    order = feature_column_order(input_columns, feature_config, target)
    usable = len(frame) - warmup
    bounds_usable = cv_boundaries(usable, folds)

    fold_mse: list[float] = []
    for fold_index, (val_start_u, val_end_u) in enumerate(bounds_usable):
        val_start = val_start_u + warmup  # frame-row coordinates
        val_end = val_end_u + warmup
        scaler = fit_scaler(engineered.slice_rows(0, val_start), list(order) + [target])
        matrix = build_matrix(frame, feature_config, scaler, input_columns, target)
        targets = scaled_target(frame, target, scaler, warmup)
        full = window(matrix, targets, w, target)
        target_rows = warmup + w + np.arange(len(full))
        train_idx = np.flatnonzero(target_rows < val_start)
        val_idx = np.flatnonzero((target_rows >= val_start) & (target_rows < val_end))
        if len(train_idx) == 0 or len(val_idx) == 0:
            raise TrainingError(f"fold {fold_index} has an empty train or validation block")

        def subset(idx: np.ndarray) -> WindowedDataset:
            return WindowedDataset(
                matrix_values=full.matrix_values[idx],
                targets=full.targets[idx],
                timestamps=full.timestamps[idx],
                target_name=target,
                window=w,
            )

        descriptor = replace(template, input_dim=full.width)
        model = build(descriptor, seed=config.seed + fold_index)
        result = train(model, subset(train_idx), subset(val_idx), config)
        fold_mse.append(result.best_val_loss)

    return CvResult(float(np.mean(fold_mse)), fold_mse, bounds_usable)


# ---------------------------------------------------------------------------
# Bayesian hyperparameter optimization: GP surrogate + expected improvement.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dimension:
    """One search dimension: continuous (optionally log), integer, or choice."""

    name: str
    kind: str  # "float" | "int" | "choice"
    low: float | None = None
    high: float | None = None
    log: bool = False
    choices: tuple | None = None

    def __post_init__(self) -> None:
        if self.kind in ("float", "int"):
            if self.low is None or self.high is None or not self.high > self.low:
                raise TrainingError(f"dimension {self.name!r} needs finite low < high")
            if self.log and self.low <= 0:
                raise TrainingError(f"log dimension {self.name!r} needs positive bounds")
        elif self.kind == "choice":
            if not self.choices:
                raise TrainingError(f"choice dimension {self.name!r} needs options")
        else:
            raise TrainingError(f"unknown dimension kind {self.kind!r}")

    def decode(self, u: float) -> object:
        """Map a unit-interval coordinate to a concrete value."""
        u = min(max(u, 0.0), 1.0)
        if self.kind == "choice":
            index = min(int(u * len(self.choices)), len(self.choices) - 1)
            return self.choices[index]
        if self.log:
            value = math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        else:
            value = self.low + u * (self.high - self.low)
        if self.kind == "int":
            return int(round(value))
        return value


@dataclass(frozen=True)
class HyperoptSpec:
    dimensions: tuple[Dimension, ...]
    initial_design: int = 5
    budget: int = 20
    seed: int = 0
    candidates: int = 2048

    def __post_init__(self) -> None:
        if self.initial_design < 2:
            raise TrainingError("initial design must have at least 2 points")
        if self.budget < self.initial_design:
            raise TrainingError("budget must cover the initial design")
        if self.candidates < 1024:
            raise TrainingError("candidate pool must be at least 1024")


def default_space(architecture: str, seed: int = 0, budget: int = 20, design: int = 5) -> HyperoptSpec:
    dims: list[Dimension] = [
        Dimension("hidden", "int", 16, 128),
        Dimension("learning_rate", "float", 1e-4, 1e-2, log=True),
        Dimension("batch_size", "choice", choices=(32, 64, 128)),
    ]
    if architecture == "stacked":
        dims.append(Dimension("layers", "choice", choices=(2, 3)))
    if architecture == "conv":
        dims.append(Dimension("kernel", "choice", choices=(1, 3, 5)))
    return HyperoptSpec(tuple(dims), initial_design=design, budget=budget, seed=seed)


@dataclass(frozen=True)
class TraceEntry:
    config: dict
    value: float
    incumbent_value: float


@dataclass
class BayesOptResult:
    best_config: dict
    best_value: float
    trace: list[TraceEntry]


def _rbf_kernel(a: np.ndarray, b: np.ndarray, lengthscale: float) -> np.ndarray:
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-0.5 * sq / lengthscale**2)


def _norm_cdf(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))


def _expected_improvement(
    mu: np.ndarray, sigma: np.ndarray, best: float, xi: float = 0.01
) -> np.ndarray:
    improvement = best - mu - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, improvement / sigma, 0.0)
    ei = improvement * _norm_cdf(z) + sigma * np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi)
    return np.where(sigma > 0, ei, np.maximum(improvement, 0.0))


def bayes_opt(objective: Callable[[dict], float], spec: HyperoptSpec) -> BayesOptResult:
    """Minimize a black-box objective over the given search space.

    Random initial design, then a Gaussian-process surrogate (stationary RBF
    kernel over the normalized space) whose expected-improvement maximizer,
    found by dense random candidate sampling, is evaluated each round.
    Non-finite objective values are recorded with a large penalty and the
    search continues.
    """
    rng = np.random.default_rng(spec.seed)
    ndim = len(spec.dimensions)
    lengthscale = 0.2 * math.sqrt(ndim)

    points: list[np.ndarray] = []
    values: list[float] = []
    trace: list[TraceEntry] = []
    best_value = math.inf
    best_config: dict = {}

    def decode(u: np.ndarray) -> dict:
        return {dim.name: dim.decode(u[i]) for i, dim in enumerate(spec.dimensions)}

    def record(u: np.ndarray) -> None:
        nonlocal best_value, best_config
        config = decode(u)
        raw = objective(config)
        if raw is None or not math.isfinite(raw):
            finite = [v for v in values if math.isfinite(v)]
            spread = (max(finite) - min(finite)) if len(finite) > 1 else 1.0
            raw = (max(finite) if finite else 1e6) + 10.0 * (spread + 1.0)
        value = float(raw)
        points.append(u)
        values.append(value)
        if value < best_value:
            best_value = value
            best_config = config
        trace.append(TraceEntry(config, value, best_value))

    for _ in range(spec.initial_design):
        record(rng.uniform(size=ndim))

    for _ in range(spec.budget - spec.initial_design):
        X = np.vstack(points)
        y = np.asarray(values)
        y_mean = y.mean()
        y_std = y.std()
        y_norm = (y - y_mean) / (y_std if y_std > 0 else 1.0)
        K = _rbf_kernel(X, X, lengthscale) + 1e-6 * np.eye(len(X))
        L = np.linalg.cholesky(K)
        alpha = np.linalg.solve(L.T, np.linalg.solve(L, y_norm))

        candidates = rng.uniform(size=(spec.candidates, ndim))
        Ks = _rbf_kernel(candidates, X, lengthscale)
        mu = Ks @ alpha
        v = np.linalg.solve(L, Ks.T)
        var = np.clip(1.0 - (v**2).sum(axis=0), 0.0, None)
        sigma = np.sqrt(var)
        best_norm = (best_value - y_mean) / (y_std if y_std > 0 else 1.0)
        ei = _expected_improvement(mu, sigma, best_norm)
        record(candidates[int(np.argmax(ei))])

    return BayesOptResult(best_config, best_value, trace)


def tune(
    frame: TimeSeriesFrame,
    input_columns: Sequence[str],
    target: str,
    architecture: str,
    feature_config: FeatureConfig,
    train_config: TrainConfig,
    spec: HyperoptSpec | None = None,
    folds: int = 3,
) -> tuple[TrainedModel, TrainResult, BayesOptResult]:
    """Search hyperparameters by CV, then train the incumbent on the split."""
    spec = spec or default_space(architecture, seed=train_config.seed)

    def objective(config: dict) -> float:
        template = ModelDescriptor(
            architecture=architecture,
            input_dim=1,
            hidden=config["hidden"],
            layers=config.get("layers", 2 if architecture == "stacked" else 1),
            kernel=config.get("kernel", 3),
        )
        cv_config = replace(
            train_config,
            learning_rate=config["learning_rate"],
            batch_size=config["batch_size"],
        )
        try:
            return forward_chain_cv(
                frame, input_columns, target, template, feature_config, cv_config, folds
            ).mean_val_mse
        except (TrainingError, TrainingDivergedError):
            return math.inf

    search = bayes_opt(objective, spec)
    best = search.best_config
    final_config = replace(
        train_config,
        learning_rate=best["learning_rate"],
        batch_size=best["batch_size"],
    )
    trained, result = fit_forecaster(
        frame,
        input_columns,
        target,
        architecture,
        feature_config,
        final_config,
        hidden=best["hidden"],
        layers=best.get("layers", 2),
        kernel=best.get("kernel", 3),
    )
    trained.metadata["hyperopt"] = {"best_config": best, "evaluations": len(search.trace)}
    return trained, result, search
