"""Multi-step forecasting over 1-3 day horizons.

Exogenous mode slides the input window over observed feature rows, so every
prediction uses only data at strictly earlier timestamps. Autoregressive
mode substitutes the model's own prior predictions into the target-derived
lag and rolling columns, which requires a model trained with target lags.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .architectures import TrainedModel
from .features import (
    FeatureMatrix,
    build_matrix,
    lag_column_name,
    rolling_column_name,
)
from .ingest import TimeSeriesFrame
from .training import ColumnScaler, MetricsReport, metrics

MODES = ("exogenous", "autoregressive")


class ForecastError(Exception):
    pass


class FingerprintMismatchError(ForecastError):
    """Model and dataset disagree on columns, interval, or feature layout."""


@dataclass(frozen=True)
class ForecastResult:
    timestamps: np.ndarray
    predicted: np.ndarray
    actual: np.ndarray | None
    residuals_scaled: np.ndarray | None
    start: int
    horizon_steps: int
    mode: str
    target: str

    def __len__(self) -> int:
        return self.horizon_steps


def check_compatible(model: TrainedModel, frame: TimeSeriesFrame) -> None:
    """Raise when the frame cannot feed the model's feature pipeline."""
    missing = [c for c in model.input_columns if c not in frame.columns]
    if missing:
        raise FingerprintMismatchError(f"dataset lacks model input columns: {missing}")
    if model.target not in frame.columns:
        raise FingerprintMismatchError(f"dataset lacks target column {model.target!r}")
    if frame.interval_s != model.interval_s:
        raise FingerprintMismatchError(
            f"dataset interval {frame.interval_s} s != model interval {model.interval_s} s"
        )


def _predict_batched(model: TrainedModel, x: np.ndarray, batch: int = 1024) -> np.ndarray:
    out = np.empty(len(x))
    for start in range(0, len(x), batch):
        out[start : start + batch] = model.predict(x[start : start + batch])
    return out


def forecast(
    model: TrainedModel,
    frame: TimeSeriesFrame,
    start: int,
    horizon_steps: int,
    mode: str = "exogenous",
) -> ForecastResult:
    """Predict `horizon_steps` values beginning at frame row `start`.

    `start` must leave room for the feature warm-up plus the model window,
    and the horizon must stay inside the frame (inputs are observed).
    """
    if mode not in MODES:
        raise ForecastError(f"unknown mode {mode!r}")
    check_compatible(model, frame)
    config = model.feature_config
    warmup = config.warmup_rows
    w = config.input_window
    if horizon_steps < 1:
        raise ForecastError("horizon must be at least 1 step")
    if start < warmup + w:
        raise ForecastError(f"start {start} is inside the warm-up region ({warmup + w} rows)")
    if start + horizon_steps > len(frame):
        raise ForecastError(
            f"horizon {horizon_steps} from row {start} runs past the {len(frame)}-row frame"
        )
    if mode == "autoregressive" and not config.include_target_lags:
        raise ForecastError("autoregressive mode requires a model trained with target lags")

    matrix = build_matrix(frame, config, model.scaler, model.input_columns, model.target)
    if mode == "exogenous":
        pred_scaled = _forecast_exogenous(model, matrix, start, horizon_steps)
    else:
        pred_scaled = _forecast_autoregressive(model, frame, matrix, start, horizon_steps)
    if not np.all(np.isfinite(pred_scaled)):
        raise ForecastError("model produced non-finite predictions")

    predicted = model.scaler.invert(model.target, pred_scaled)
    actual = frame.column(model.target)[start : start + horizon_steps]
    actual_scaled = model.scaler.transform(model.target, actual)
    return ForecastResult(
        timestamps=frame.timestamps[start : start + horizon_steps],
        predicted=predicted,
        actual=actual.copy(),
        residuals_scaled=pred_scaled - actual_scaled,
        start=start,
        horizon_steps=horizon_steps,
        mode=mode,
        target=model.target,
    )


def _forecast_exogenous(
    model: TrainedModel, matrix: FeatureMatrix, start: int, horizon_steps: int
) -> np.ndarray:
    """All windows at once: prediction for row t uses matrix rows [t-W, t)."""
    w = model.feature_config.input_window
    warmup = matrix.warmup_rows
    window_starts = np.arange(start, start + horizon_steps) - warmup - w
    view = np.lib.stride_tricks.sliding_window_view(matrix.values, w, axis=0)
    samples = view.transpose(0, 2, 1)[window_starts]
    return _predict_batched(model, samples)


def _forecast_autoregressive(
    model: TrainedModel,
    frame: TimeSeriesFrame,
    matrix: FeatureMatrix,
    start: int,
    horizon_steps: int,
) -> np.ndarray:
    """Step-by-step feedback: target-derived columns are recomputed from a
    working copy of the target series in which rows >= start hold the
    model's own earlier predictions (original units).
    """
    config = model.feature_config
    w = config.input_window
    warmup = matrix.warmup_rows
    target = model.target
    scaler = model.scaler
    columns = list(matrix.column_names)

    # Each engineered column carries its own min-max bounds; recomputed raw
    # values must be scaled with the column's bounds, not the target's.
    lag_name = lag_column_name(target, config.lag_steps)
    lag_idx = columns.index(lag_name)
    lag_lo, lag_hi = scaler.bounds(lag_name)
    rolling_spec: list[tuple[int, int, str, float, float]] = []
    for win in sorted(config.rolling_windows):
        for stat in config.rolling_stats:
            name = rolling_column_name(target, stat, win)
            lo, hi = scaler.bounds(name)
            rolling_spec.append((columns.index(name), win, stat, lo, hi))

    sub_target = frame.column(target).copy()
    values = matrix.values  # rows are frame rows shifted by warmup
    lag = config.lag_steps
    predictions = np.empty(horizon_steps)

    for step, t in enumerate(range(start, start + horizon_steps)):
        block = values[t - warmup - w : t - warmup].copy()  # (w, d)
        for offset, j in enumerate(range(t - w, t)):
            block[offset, lag_idx] = (sub_target[j - lag] - lag_lo) / (lag_hi - lag_lo)
            for col_idx, win, stat, lo, hi in rolling_spec:
                trailing = sub_target[j - win + 1 : j + 1]
                raw = trailing.mean() if stat == "mean" else trailing.std(ddof=1)
                block[offset, col_idx] = (raw - lo) / (hi - lo)
        pred_scaled = float(model.predict(block[None, :, :])[0])
        predictions[step] = pred_scaled
        sub_target[t] = scaler.invert(target, np.asarray([pred_scaled]))[0]
    return predictions


def horizon_degradation(
    model: TrainedModel,
    frame: TimeSeriesFrame,
    start: int,
    horizons: tuple[int, ...],
    mode: str = "exogenous",
) -> dict[int, MetricsReport]:
    """Metrics per horizon from the same start point.

    Both modes are prefix-consistent (a prediction never depends on later
    steps), so one forecast at the longest horizon is sliced per horizon.
    """
    if not horizons:
        raise ForecastError("at least one horizon is required")
    longest = max(horizons)
    result = forecast(model, frame, start, longest, mode)
    scaler = ColumnScaler.from_state(model.scaler, model.target)
    reports: dict[int, MetricsReport] = {}
    for h in horizons:
        reports[h] = metrics(result.predicted[:h], result.actual[:h], scaler)
    return reports


def result_to_csv_rows(result: ForecastResult) -> list[tuple[str, str, str]]:
    """(timestamp, predicted, actual) rows; actual blank when unknown."""
    from .ingest import format_timestamp

    rows = []
    for i in range(len(result)):
        actual = "" if result.actual is None else repr(float(result.actual[i]))
        rows.append(
            (format_timestamp(result.timestamps[i]), repr(float(result.predicted[i])), actual)
        )
    return rows
