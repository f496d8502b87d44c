"""Plant telemetry ingestion: validated time-series frames and cleaning ops.

Conventions: timestamps are UTC epoch seconds (int64), values are float64,
and missing readings are NaN until `fill_missing` removes them. Frames are
immutable once constructed; every operation returns a new frame.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

TIMESTAMP_COLUMN = "timestamp"


class IngestError(Exception):
    """Base class for ingestion failures."""


class SchemaError(IngestError):
    """Header or column set does not match the expected schema."""


class OrderingError(IngestError):
    """Timestamps are not strictly increasing or spans overlap."""


class EmptyInputError(IngestError):
    """No data rows where at least one is required."""


class UnfillableColumnError(IngestError):
    """A column has too few readings to interpolate."""


class InsufficientDataError(IngestError):
    """Too few rows for the requested operation."""


class SplitError(IngestError):
    """Invalid fractions or a split segment is too small."""


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 timestamp to UTC epoch seconds.

    A trailing 'Z' is accepted; naive timestamps are assumed UTC.
    """
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(epoch_s: int) -> str:
    dt = datetime.fromtimestamp(int(epoch_s), tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class PlantSchema:
    """Column layout of a capture-plant telemetry export.

    Eight operational inputs, four emission readings (two amines, each
    measured by two instruments) and four performance readings.
    """

    input_columns: tuple[str, ...]
    emission_columns: tuple[str, ...]
    performance_columns: tuple[str, ...]
    units: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.input_columns) != 8:
            raise SchemaError(f"expected 8 input columns, got {len(self.input_columns)}")
        if len(self.emission_columns) != 4:
            raise SchemaError(f"expected 4 emission columns, got {len(self.emission_columns)}")
        if len(self.performance_columns) != 4:
            raise SchemaError(
                f"expected 4 performance columns, got {len(self.performance_columns)}"
            )
        names = self.all_columns
        if len(set(names)) != len(names):
            raise SchemaError("schema column names must be unique")

    @property
    def all_columns(self) -> tuple[str, ...]:
        return self.input_columns + self.emission_columns + self.performance_columns

    @property
    def output_columns(self) -> tuple[str, ...]:
        return self.emission_columns + self.performance_columns

    @classmethod
    def default(cls) -> "PlantSchema":
        inputs = (
            "fg_inlet_flow",
            "fg_temp",
            "lean_solvent_flow",
            "lean_solvent_temp",
            "upper_ww_flow",
            "upper_ww_temp",
            "lower_ww_flow",
            "lower_ww_temp",
        )
        emissions = ("amp_ftir", "amp_imr_ms", "pz_ftir", "pz_imr_ms")
        performance = (
            "co2_product_flow",
            "absorber_outlet_temp",
            "depleted_fg_temp",
            "stripper_bottom_temp",
        )
        units = {
            "fg_inlet_flow": "Sm3/h",
            "fg_temp": "degC",
            "lean_solvent_flow": "kg/h",
            "lean_solvent_temp": "degC",
            "upper_ww_flow": "kg/h",
            "upper_ww_temp": "degC",
            "lower_ww_flow": "kg/h",
            "lower_ww_temp": "degC",
            "amp_ftir": "ppmv",
            "amp_imr_ms": "ppmv",
            "pz_ftir": "ppmv",
            "pz_imr_ms": "ppmv",
            "co2_product_flow": "kg/h",
            "absorber_outlet_temp": "degC",
            "depleted_fg_temp": "degC",
            "stripper_bottom_temp": "degC",
        }
        return cls(inputs, emissions, performance, units)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Immutable timestamped multi-column numeric table.

    `interval_s` is the nominal spacing; a concatenation seam may leave a
    single larger gap, which is flagged in `provenance`.
    """

    timestamps: np.ndarray
    columns: dict[str, np.ndarray]
    interval_s: int
    provenance: str = ""

    def __post_init__(self) -> None:
        ts = np.array(self.timestamps, dtype=np.int64, copy=True)
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        cols = {}
        for name, values in self.columns.items():
            arr = _freeze(values)
            if arr.ndim != 1 or len(arr) != len(ts):
                raise IngestError(
                    f"column {name!r} length {arr.shape} does not match {len(ts)} timestamps"
                )
            cols[name] = arr
        object.__setattr__(self, "columns", cols)
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise OrderingError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    @property
    def start(self) -> int:
        return int(self.timestamps[0])

    @property
    def end(self) -> int:
        return int(self.timestamps[-1])

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"unknown column {name!r}") from None

    def missing_count(self) -> int:
        return int(sum(np.isnan(v).sum() for v in self.columns.values()))

    def slice_rows(self, start: int, stop: int) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            self.timestamps[start:stop],
            {k: v[start:stop] for k, v in self.columns.items()},
            self.interval_s,
            self.provenance,
        )

    def with_columns(self, extra: Mapping[str, np.ndarray]) -> "TimeSeriesFrame":
        merged = dict(self.columns)
        merged.update(extra)
        return TimeSeriesFrame(self.timestamps, merged, self.interval_s, self.provenance)

    def replace_column(self, name: str, values: np.ndarray) -> "TimeSeriesFrame":
        if name not in self.columns:
            raise SchemaError(f"unknown column {name!r}")
        return self.with_columns({name: values})


class FillResult(NamedTuple):
    frame: TimeSeriesFrame
    filled_cells: int


def _infer_interval(timestamps: np.ndarray) -> int:
    if len(timestamps) < 2:
        return 0
    gaps = np.diff(timestamps)
    mode, _ = Counter(gaps.tolist()).most_common(1)[0]
    return int(mode)


def load_csv(path: str | Path, schema: PlantSchema) -> TimeSeriesFrame:
    """Load a telemetry CSV into a frame, mapping bad cells to NaN.

    The header must contain `timestamp` plus every schema column; extra
    columns are ignored. The interval is inferred as the modal spacing.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        dupes = [h for h, n in Counter(header).items() if n > 1]
        if dupes:
            raise SchemaError(f"duplicate columns in {path}: {dupes}")
        if TIMESTAMP_COLUMN not in header:
            raise SchemaError(f"{path} has no {TIMESTAMP_COLUMN!r} column")
        missing = [c for c in schema.all_columns if c not in header]
        if missing:
            raise SchemaError(f"{path} is missing columns: {missing}")

        ts_idx = header.index(TIMESTAMP_COLUMN)
        col_idx = {c: header.index(c) for c in schema.all_columns}
        timestamps: list[int] = []
        data: dict[str, list[float]] = {c: [] for c in schema.all_columns}
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                timestamps.append(parse_timestamp(row[ts_idx]))
            except ValueError as exc:
                raise IngestError(f"bad timestamp {row[ts_idx]!r} in {path}") from exc
            for name, idx in col_idx.items():
                cell = row[idx].strip() if idx < len(row) else ""
                try:
                    data[name].append(float(cell))
                except ValueError:
                    data[name].append(math.nan)

    if not timestamps:
        raise EmptyInputError(f"{path} has a header but no data rows")
    ts = np.asarray(timestamps, dtype=np.int64)
    if len(ts) > 1 and not np.all(np.diff(ts) > 0):
        raise OrderingError(f"timestamps in {path} are not strictly increasing")
    return TimeSeriesFrame(
        ts,
        {name: np.asarray(vals) for name, vals in data.items()},
        _infer_interval(ts),
        provenance=f"csv:{path.name}",
    )


def write_csv(frame: TimeSeriesFrame, path: str | Path, columns: Sequence[str] | None = None) -> None:
    """Write a frame as CSV (ISO timestamps, repr floats, blanks for NaN)."""
    names = list(columns) if columns is not None else list(frame.column_names)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([TIMESTAMP_COLUMN, *names])
        cols = [frame.column(n) for n in names]
        for i, t in enumerate(frame.timestamps):
            row = [format_timestamp(t)]
            for col in cols:
                v = col[i]
                row.append("" if math.isnan(v) else repr(float(v)))
            writer.writerow(row)


def fill_missing(frame: TimeSeriesFrame) -> FillResult:
    """Replace NaNs by time-based linear interpolation.

    Interior gaps are interpolated between the nearest readings; leading and
    trailing gaps take the nearest edge value. Returns the cleaned frame and
    the number of filled cells.
    """
    filled = 0
    new_cols: dict[str, np.ndarray] = {}
    ts = frame.timestamps.astype(np.float64)
    for name, values in frame.columns.items():
        mask = np.isnan(values)
        n_missing = int(mask.sum())
        if n_missing == 0:
            new_cols[name] = values
            continue
        known = ~mask
        if known.sum() < 2:
            raise UnfillableColumnError(
                f"column {name!r} has {int(known.sum())} readings; at least 2 required"
            )
        out = values.copy()
        out[mask] = np.interp(ts[mask], ts[known], values[known])
        new_cols[name] = out
        filled += n_missing
    cleaned = TimeSeriesFrame(frame.timestamps, new_cols, frame.interval_s, frame.provenance)
    return FillResult(cleaned, filled)


def downsample_alternate(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Drop every odd-indexed row, turning 5-minute data into 10-minute data."""
    if frame.interval_s != 300:
        raise IngestError(f"downsample expects a 300 s frame, got {frame.interval_s} s")
    if len(frame) < 2:
        raise InsufficientDataError("need at least 2 rows to downsample")
    return TimeSeriesFrame(
        frame.timestamps[::2],
        {k: v[::2] for k, v in frame.columns.items()},
        600,
        provenance=f"{frame.provenance};downsampled_to_600s",
    )


def concat(a: TimeSeriesFrame, b: TimeSeriesFrame) -> TimeSeriesFrame:
    """Concatenate two frames in time order; a seam gap is flagged, not fixed."""
    if len(a) == 0 or len(b) == 0:
        raise EmptyInputError("cannot concatenate an empty frame")
    if set(a.column_names) != set(b.column_names):
        raise SchemaError("frames have different column sets")
    if a.interval_s != b.interval_s:
        raise SchemaError(f"interval mismatch: {a.interval_s} vs {b.interval_s}")
    if b.start <= a.end:
        raise OrderingError("second frame must start after the first frame ends")
    provenance = f"{a.provenance}+{b.provenance}"
    if b.start - a.end != a.interval_s:
        provenance += f";gap={b.start - a.end}s"
    return TimeSeriesFrame(
        np.concatenate([a.timestamps, b.timestamps]),
        {k: np.concatenate([a.columns[k], b.columns[k]]) for k in a.column_names},
        a.interval_s,
        provenance,
    )


def chronological_split(
    frame: TimeSeriesFrame,
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
    min_rows: int = 1,
) -> tuple[TimeSeriesFrame, TimeSeriesFrame, TimeSeriesFrame]:
    """Split into contiguous train/val/test segments, test being the latest.

    Lengths are floor(n*f_train), floor(n*f_val), remainder. `min_rows` lets
    callers enforce the consuming model's warm-up requirement.
    """
    if any(f <= 0 for f in fractions):
        raise SplitError(f"fractions must all be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(frame)
    n_train = math.floor(n * fractions[0])
    n_val = math.floor(n * fractions[1])
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < min_rows:
        raise SplitError(
            f"split {n_train}/{n_val}/{n_test} of {n} rows has a segment below {min_rows}"
        )
    return (
        frame.slice_rows(0, n_train),
        frame.slice_rows(n_train, n_train + n_val),
        frame.slice_rows(n_train + n_val, n),
    )
