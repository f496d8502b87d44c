"""Feature engineering: scaling, lag columns, rolling stats, windowing.

All engineered features are trailing (causal): a value at row t depends only
on rows <= t. Lag and rolling columns carry NaN over their warm-up rows;
`build_matrix` drops those rows and scales everything with a scaler fitted
on the training segment only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ingest import TimeSeriesFrame

ROLLING_STATS = ("mean", "std")
# Rolling windows must span 30 min, 1 h, 2 h or 3 h at the frame interval.
ALLOWED_WINDOW_SECONDS = (1800, 3600, 7200, 10800)


class FeatureError(Exception):
    """Base class for feature-engineering failures."""


class DegenerateScaleError(FeatureError):
    """A column is constant and cannot be min-max scaled."""


class DegenerateWindowError(FeatureError):
    """A rolling window too short for the requested statistic."""


class InsufficientRowsError(FeatureError):
    """Frame shorter than a lag/window requires."""


@dataclass(frozen=True)
class FeatureConfig:
    """Engineered-feature layout shared by training, forecasting and sweeps.

    `lag_steps` must equal one hour at the frame interval; rolling windows
    must land on the 30 min / 1 h / 2 h / 3 h marks.
    """

    lag_steps: int
    rolling_windows: tuple[int, ...]
    rolling_stats: tuple[str, ...] = ("mean", "std")
    include_target_lags: bool = False
    input_window: int = 12

    def __post_init__(self) -> None:
        if self.lag_steps < 1:
            raise FeatureError("lag_steps must be >= 1")
        if self.input_window < 1:
            raise FeatureError("input_window must be >= 1")
        for stat in self.rolling_stats:
            if stat not in ROLLING_STATS:
                raise FeatureError(f"unknown rolling stat {stat!r}")
        for w in self.rolling_windows:
            if w < 2:
                raise DegenerateWindowError(f"rolling window {w} must be >= 2")

    @property
    def warmup_rows(self) -> int:
        """Leading rows consumed before the first fully defined feature row."""
        max_window = max(self.rolling_windows) if self.rolling_windows else 1
        return max(self.lag_steps, max_window - 1)

    def validate_for_interval(self, interval_s: int) -> None:
        if self.lag_steps * interval_s != 3600:
            raise FeatureError(
                f"lag_steps {self.lag_steps} at {interval_s} s is not a 1-hour lag"
            )
        for w in self.rolling_windows:
            if w * interval_s not in ALLOWED_WINDOW_SECONDS:
                raise FeatureError(
                    f"rolling window {w} at {interval_s} s spans {w * interval_s} s; "
                    f"allowed spans are {ALLOWED_WINDOW_SECONDS}"
                )

    @classmethod
    def for_interval(
        cls,
        interval_s: int,
        input_window: int = 12,
        include_target_lags: bool = False,
    ) -> "FeatureConfig":
        if 3600 % interval_s != 0:
            raise FeatureError(f"interval {interval_s} s does not divide one hour")
        step = 3600 // interval_s
        windows = tuple(span // interval_s for span in ALLOWED_WINDOW_SECONDS)
        return cls(
            lag_steps=step,
            rolling_windows=windows,
            include_target_lags=include_target_lags,
            input_window=input_window,
        )

    def fingerprint_payload(self) -> dict:
        return asdict(self)


def lag_column_name(column: str, lag: int) -> str:
    return f"{column}_lag{lag}"


def rolling_column_name(column: str, stat: str, window: int) -> str:
    return f"{column}_r{stat}{window}"


def make_lags(frame: TimeSeriesFrame, columns: Sequence[str], lag_steps: int) -> TimeSeriesFrame:
    """Add `<name>_lag<L>` columns; the first L rows are NaN warm-up."""
    if lag_steps < 1:
        raise FeatureError("lag_steps must be >= 1")
    if lag_steps >= len(frame):
        raise InsufficientRowsError(
            f"lag of {lag_steps} needs more than {len(frame)} rows"
        )
    extra: dict[str, np.ndarray] = {}
    for name in columns:
        values = frame.column(name)
        lagged = np.full(len(values), np.nan)
        lagged[lag_steps:] = values[:-lag_steps]
        extra[lag_column_name(name, lag_steps)] = lagged
    return frame.with_columns(extra)


def _rolling_stat(values: np.ndarray, window: int, stat: str) -> np.ndarray:
    out = np.full(len(values), np.nan)
    if len(values) >= window:
        view = sliding_window_view(values, window)
        if stat == "mean":
            out[window - 1 :] = view.mean(axis=1)
        else:
            # Sample standard deviation (divisor window - 1).
            out[window - 1 :] = view.std(axis=1, ddof=1)
    return out


def make_rolling(
    frame: TimeSeriesFrame,
    columns: Sequence[str],
    windows: Sequence[int],
    stats: Sequence[str] = ROLLING_STATS,
) -> TimeSeriesFrame:
    """Add trailing rolling mean/std columns; first w-1 rows are NaN warm-up."""
    for stat in stats:
        if stat not in ROLLING_STATS:
            raise FeatureError(f"unknown rolling stat {stat!r}")
    for w in windows:
        if w < 2:
            raise DegenerateWindowError(f"rolling window {w} must be >= 2")
    extra: dict[str, np.ndarray] = {}
    for name in columns:
        values = frame.column(name)
        for w in windows:
            for stat in stats:
                extra[rolling_column_name(name, stat, w)] = _rolling_stat(values, w, stat)
    return frame.with_columns(extra)


@dataclass(frozen=True)
class ScalerState:
    """Per-column min-max bounds fitted on the training segment."""

    mins: Mapping[str, float]
    maxs: Mapping[str, float]

    def __post_init__(self) -> None:
        for name in self.mins:
            if not self.maxs[name] > self.mins[name]:
                raise DegenerateScaleError(f"column {name!r} has min >= max")

    def columns(self) -> tuple[str, ...]:
        return tuple(self.mins)

    def transform(self, name: str, values: np.ndarray) -> np.ndarray:
        lo, hi = self.mins[name], self.maxs[name]
        return (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)

    def invert(self, name: str, values: np.ndarray) -> np.ndarray:
        lo, hi = self.mins[name], self.maxs[name]
        return np.asarray(values, dtype=np.float64) * (hi - lo) + lo

    def bounds(self, name: str) -> tuple[float, float]:
        return self.mins[name], self.maxs[name]


def fit_scaler(frame: TimeSeriesFrame, columns: Sequence[str]) -> ScalerState:
    """Fit per-column (min, max) over finite values; NaN warm-up rows are skipped."""
    mins: dict[str, float] = {}
    maxs: dict[str, float] = {}
    for name in columns:
        values = frame.column(name)
        finite = values[np.isfinite(values)]
        if len(finite) < 2:
            raise DegenerateScaleError(f"column {name!r} has fewer than 2 readings")
        lo, hi = float(finite.min()), float(finite.max())
        if not hi > lo:
            raise DegenerateScaleError(f"column {name!r} is constant at {lo}")
        mins[name] = lo
        maxs[name] = hi
    return ScalerState(mins, maxs)


def feature_column_order(
    input_columns: Sequence[str], config: FeatureConfig, target: str | None = None
) -> tuple[str, ...]:
    """Deterministic matrix layout: raw inputs, input lags, input rolling
    stats ordered by (column, window, stat), then target lag and target
    rolling stats when enabled.
    """
    names: list[str] = list(input_columns)
    names += [lag_column_name(c, config.lag_steps) for c in input_columns]
    for c in input_columns:
        for w in sorted(config.rolling_windows):
            for stat in config.rolling_stats:
                names.append(rolling_column_name(c, stat, w))
    if config.include_target_lags:
        if target is None:
            raise FeatureError("include_target_lags requires a target column")
        names.append(lag_column_name(target, config.lag_steps))
        for w in sorted(config.rolling_windows):
            for stat in config.rolling_stats:
                names.append(rolling_column_name(target, stat, w))
    return tuple(names)


def engineer(
    frame: TimeSeriesFrame,
    input_columns: Sequence[str],
    config: FeatureConfig,
    target: str | None = None,
) -> TimeSeriesFrame:
    """Add every lag/rolling column the config calls for (warm-up rows NaN)."""
    engineered = make_lags(frame, input_columns, config.lag_steps)
    if config.rolling_windows:
        engineered = make_rolling(
            engineered, input_columns, config.rolling_windows, config.rolling_stats
        )
    if config.include_target_lags:
        if target is None:
            raise FeatureError("include_target_lags requires a target column")
        engineered = make_lags(engineered, [target], config.lag_steps)
        if config.rolling_windows:
            engineered = make_rolling(
                engineered, [target], config.rolling_windows, config.rolling_stats
            )
    return engineered


@dataclass(frozen=True)
class FeatureMatrix:
    """Scaled model-input matrix with warm-up rows already dropped.

    Values scale to [0, 1] on the training segment; rows outside the training
    range may exceed it, which is permitted and counted in `out_of_range`.
    """

    timestamps: np.ndarray
    column_names: tuple[str, ...]
    values: np.ndarray
    warmup_rows: int
    out_of_range: int

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.timestamps), len(self.column_names)):
            raise FeatureError("matrix shape does not match timestamps/columns")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def width(self) -> int:
        return len(self.column_names)


def build_matrix(
    frame: TimeSeriesFrame,
    config: FeatureConfig,
    scaler: ScalerState,
    input_columns: Sequence[str],
    target: str | None = None,
) -> FeatureMatrix:
    """Engineer, drop warm-up rows, scale, and fix the column order."""
    engineered = engineer(frame, input_columns, config, target)
    order = feature_column_order(input_columns, config, target)
    warmup = config.warmup_rows
    if len(frame) <= warmup:
        raise InsufficientRowsError(
            f"frame of {len(frame)} rows is consumed entirely by {warmup} warm-up rows"
        )
    matrix = np.empty((len(frame) - warmup, len(order)), dtype=np.float64)
    for j, name in enumerate(order):
        matrix[:, j] = scaler.transform(name, engineered.column(name)[warmup:])
    if np.isnan(matrix).any():
        raise FeatureError("engineered matrix contains NaN after warm-up drop")
    out_of_range = int(((matrix < 0.0) | (matrix > 1.0)).sum())
    return FeatureMatrix(
        timestamps=frame.timestamps[warmup:],
        column_names=order,
        values=matrix,
        warmup_rows=warmup,
        out_of_range=out_of_range,
    )


def scaled_target(
    frame: TimeSeriesFrame, target: str, scaler: ScalerState, warmup_rows: int
) -> np.ndarray:
    """Target series aligned with a matrix built from the same frame."""
    return scaler.transform(target, frame.column(target)[warmup_rows:])


@dataclass(frozen=True)
class WindowedDataset:
    """Stride-1 supervised samples: W consecutive rows -> next target value."""

    matrix_values: np.ndarray
    targets: np.ndarray
    timestamps: np.ndarray
    target_name: str
    window: int

    def __post_init__(self) -> None:
        if len(self.targets) != len(self.timestamps):
            raise FeatureError("targets and timestamps length mismatch")

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def width(self) -> int:
        return self.matrix_values.shape[2]

    def batch(self, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.matrix_values[indices], self.targets[indices]


def window(
    matrix: FeatureMatrix,
    target_series: np.ndarray,
    input_window: int,
    target_name: str = "",
) -> WindowedDataset:
    """Build the sliding-window dataset: sample i pairs rows [i, i+W) with
    the target at row i+W, giving rows - W samples.
    """
    w = input_window
    n = len(matrix)
    if n < w + 1:
        raise InsufficientRowsError(f"{n} rows cannot form a window of {w} plus a target")
    if len(target_series) != n:
        raise FeatureError("target series must align with the matrix rows")
    view = sliding_window_view(matrix.values, w, axis=0)  # (n-w+1, d, w)
    samples = view.transpose(0, 2, 1)[: n - w]  # (n-w, w, d), zero-copy
    return WindowedDataset(
        matrix_values=samples,
        targets=np.asarray(target_series[w:], dtype=np.float64),
        timestamps=matrix.timestamps[w:],
        target_name=target_name,
        window=w,
    )


def matrix_to_csv(matrix: FeatureMatrix, path) -> None:
    """Inspection export, same conventions as telemetry CSV."""
    import csv
    from pathlib import Path

    from .ingest import TIMESTAMP_COLUMN, format_timestamp

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([TIMESTAMP_COLUMN, *matrix.column_names])
        for i, t in enumerate(matrix.timestamps):
            writer.writerow(
                [format_timestamp(t), *(repr(float(v)) for v in matrix.values[i])]
            )


def fingerprint(
    input_columns: Sequence[str],
    target: str,
    interval_s: int,
    config: FeatureConfig,
) -> str:
    """Stable hash tying a model to the feature layout it was trained on."""
    payload = {
        "input_columns": list(input_columns),
        "target": target,
        "interval_s": interval_s,
        "feature_config": config.fingerprint_payload(),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
