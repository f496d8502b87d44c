"""Counterfactual intervention engine.

An intervention scales one or two raw input columns by (1 + delta) over the
evaluation window plus its full feature lookback, so lag and rolling columns
inside the window see a consistently perturbed history. Impact is the mean
percent change of the model's perturbed forecast against its own unperturbed
forecast (the counterfactual baseline), never against ground truth.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .architectures import TrainedModel
from .features import build_matrix
from .forecast import check_compatible
from .ingest import TimeSeriesFrame

# The sweep grid: -20% .. +20% in 5% increments, zero included as a built-in
# sanity cell.
DELTA_GRID: tuple[float, ...] = tuple(round(-0.20 + 0.05 * i, 2) for i in range(9))
MAX_DELTA = 0.20
_DELTA_TOL = 1e-12


class CausalError(Exception):
    pass


class UnknownFeatureError(CausalError):
    pass


class DuplicateInterventionError(CausalError):
    pass


class UndefinedImpactError(CausalError):
    """Baseline prediction too close to zero for a percent change."""


@dataclass(frozen=True)
class Intervention:
    feature: str
    delta: float

    def __post_init__(self) -> None:
        if abs(self.delta) > MAX_DELTA + _DELTA_TOL:
            raise CausalError(f"delta {self.delta} outside the +/-20% range")


@dataclass(frozen=True)
class InterventionSpec:
    """One or two scaled-input interventions over an evaluation window."""

    interventions: tuple[Intervention, ...]
    window_start: int
    window_len: int

    def __post_init__(self) -> None:
        if not 1 <= len(self.interventions) <= 2:
            raise CausalError("between 1 and 2 interventions are supported")
        names = [iv.feature for iv in self.interventions]
        if len(set(names)) != len(names):
            raise DuplicateInterventionError(f"duplicate intervention on {names}")
        if self.window_len < 1:
            raise CausalError("window length must be >= 1")
        if self.window_start < 0:
            raise CausalError("window start must be >= 0")


@dataclass(frozen=True)
class ImpactResult:
    impact_pct: float
    timestamps: np.ndarray
    baseline: np.ndarray
    counterfactual: np.ndarray


@dataclass(frozen=True)
class ImpactGrid:
    """Average-percent-change matrix for whole-grid sweeps.

    kind "single": rows are features, columns are deltas (8 x 9 for a full
    sweep). kind "pair": both axes are deltas of the named feature pair
    (9 x 9). Cell errors are recorded per cell, keyed "row,col".
    """

    kind: str
    target: str
    row_labels: tuple[str, ...]
    deltas: tuple[float, ...]
    cells: np.ndarray
    window_start: int
    window_len: int
    feature_pair: tuple[str, str] | None = None
    errors: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.cells.shape != (len(self.row_labels), len(self.deltas)):
            raise CausalError("grid shape does not match its axes")


def perturb(
    frame: TimeSeriesFrame,
    interventions: tuple[Intervention, ...] | list[Intervention],
    window_start: int,
    window_len: int,
    lookback_steps: int = 0,
) -> TimeSeriesFrame:
    """Scale each named raw input by (1 + delta) over the window and its
    preceding `lookback_steps` rows. Other columns are untouched.
    """
    interventions = tuple(interventions)
    names = [iv.feature for iv in interventions]
    if len(set(names)) != len(names):
        raise DuplicateInterventionError(f"duplicate intervention on {names}")
    for iv in interventions:
        if iv.feature not in frame.columns:
            raise UnknownFeatureError(f"unknown feature {iv.feature!r}")
    if window_start + window_len > len(frame):
        raise CausalError("evaluation window runs past the end of the frame")
    lo = window_start - lookback_steps
    if lo < 0:
        raise CausalError(
            f"window start {window_start} leaves no room for {lookback_steps} lookback rows"
        )
    out = frame
    for iv in interventions:
        values = out.column(iv.feature).copy()
        values[lo : window_start + window_len] *= 1.0 + iv.delta
        out = out.replace_column(iv.feature, values)
    return out


def _window_predictions(
    model: TrainedModel, frame_slice: TimeSeriesFrame, window_len: int
) -> np.ndarray:
    """Original-scale predictions for the last `window_len` rows of a slice
    that is exactly lookback + window long.
    """
    config = model.feature_config
    w = config.input_window
    matrix = build_matrix(frame_slice, config, model.scaler, model.input_columns, model.target)
    view = np.lib.stride_tricks.sliding_window_view(matrix.values, w, axis=0)
    samples = view.transpose(0, 2, 1)[: window_len]
    scaled = np.empty(window_len)
    for start in range(0, window_len, 1024):
        scaled[start : start + 1024] = model.predict(samples[start : start + 1024])
    return model.scaler.invert(model.target, scaled)


@dataclass
class _SweepContext:
    """Shared state for repeated impact evaluations on one window."""

    model: TrainedModel
    frame_slice: TimeSeriesFrame
    window_len: int
    baseline: np.ndarray
    timestamps: np.ndarray


def _make_context(
    model: TrainedModel, frame: TimeSeriesFrame, window_start: int, window_len: int
) -> _SweepContext:
    check_compatible(model, frame)
    config = model.feature_config
    lookback = config.warmup_rows + config.input_window
    if window_start < lookback:
        raise CausalError(
            f"window start {window_start} is inside the {lookback}-row feature lookback"
        )
    if window_start + window_len > len(frame):
        raise CausalError("evaluation window runs past the end of the frame")
    frame_slice = frame.slice_rows(window_start - lookback, window_start + window_len)
    baseline = _window_predictions(model, frame_slice, window_len)
    tiny = np.abs(baseline) <= 1e-9
    if tiny.any():
        step = int(np.flatnonzero(tiny)[0])
        raise UndefinedImpactError(
            f"baseline prediction at window step {step} is within 1e-9 of zero"
        )
    return _SweepContext(
        model=model,
        frame_slice=frame_slice,
        window_len=window_len,
        baseline=baseline,
        timestamps=frame.timestamps[window_start : window_start + window_len],
    )


def _context_impact(
    context: _SweepContext, interventions: tuple[Intervention, ...]
) -> ImpactResult:
    for iv in interventions:
        if iv.feature not in context.model.input_columns:
            raise UnknownFeatureError(
                f"{iv.feature!r} is not one of the model's input features"
            )
    # The slice covers exactly the window plus its lookback, so perturbing
    # the whole slice equals perturbing window + lookback of the full frame.
    perturbed = perturb(
        context.frame_slice, interventions, 0, len(context.frame_slice), lookback_steps=0
    )
    counterfactual = _window_predictions(context.model, perturbed, context.window_len)
    impact_pct = float(
        np.mean(100.0 * (counterfactual - context.baseline) / context.baseline)
    )
    return ImpactResult(
        impact_pct=impact_pct,
        timestamps=context.timestamps,
        baseline=context.baseline.copy(),
        counterfactual=counterfactual,
    )


def impact_detail(
    model: TrainedModel, frame: TimeSeriesFrame, spec: InterventionSpec
) -> ImpactResult:
    """Impact plus the baseline/counterfactual series behind it."""
    context = _make_context(model, frame, spec.window_start, spec.window_len)
    return _context_impact(context, spec.interventions)


def baseline_window(
    model: TrainedModel, frame: TimeSeriesFrame, window_start: int, window_len: int
) -> ImpactResult:
    """The unperturbed counterfactual baseline itself (impact exactly 0)."""
    context = _make_context(model, frame, window_start, window_len)
    return ImpactResult(
        impact_pct=0.0,
        timestamps=context.timestamps,
        baseline=context.baseline.copy(),
        counterfactual=context.baseline.copy(),
    )


def impact(model: TrainedModel, frame: TimeSeriesFrame, spec: InterventionSpec) -> float:
    """Mean percent change of the perturbed forecast over the window."""
    return impact_detail(model, frame, spec).impact_pct


def sweep_single(
    model: TrainedModel,
    frame: TimeSeriesFrame,
    window_start: int,
    window_len: int,
    features: tuple[str, ...] | None = None,
) -> ImpactGrid:
    """Impact grid over (features x DELTA_GRID); defaults to all 8 inputs."""
    rows = features if features is not None else model.input_columns
    for name in rows:
        if name not in model.input_columns:
            raise UnknownFeatureError(f"{name!r} is not one of the model's input features")
    context = _make_context(model, frame, window_start, window_len)
    cells = np.full((len(rows), len(DELTA_GRID)), np.nan)
    errors: dict[str, str] = {}
    for i, feature in enumerate(rows):
        for j, delta in enumerate(DELTA_GRID):
            try:
                cells[i, j] = _context_impact(
                    context, (Intervention(feature, delta),)
                ).impact_pct
            except CausalError as exc:
                errors[f"{i},{j}"] = str(exc)
    return ImpactGrid(
        kind="single",
        target=model.target,
        row_labels=tuple(rows),
        deltas=DELTA_GRID,
        cells=cells,
        window_start=window_start,
        window_len=window_len,
        errors=errors,
    )


def sweep_pair(
    model: TrainedModel,
    frame: TimeSeriesFrame,
    feature_a: str,
    feature_b: str,
    window_start: int,
    window_len: int,
) -> ImpactGrid:
    """9 x 9 grid over joint deltas of two distinct input features."""
    if feature_a == feature_b:
        raise CausalError("pair sweep needs two distinct features")
    for name in (feature_a, feature_b):
        if name not in model.input_columns:
            raise UnknownFeatureError(f"{name!r} is not one of the model's input features")
    context = _make_context(model, frame, window_start, window_len)
    cells = np.full((len(DELTA_GRID), len(DELTA_GRID)), np.nan)
    errors: dict[str, str] = {}
    for i, delta_a in enumerate(DELTA_GRID):
        for j, delta_b in enumerate(DELTA_GRID):
            try:
                cells[i, j] = _context_impact(
                    context,
                    (Intervention(feature_a, delta_a), Intervention(feature_b, delta_b)),
                ).impact_pct
            except CausalError as exc:
                errors[f"{i},{j}"] = str(exc)
    return ImpactGrid(
        kind="pair",
        target=model.target,
        row_labels=tuple(repr(d) for d in DELTA_GRID),
        deltas=DELTA_GRID,
        cells=cells,
        window_start=window_start,
        window_len=window_len,
        feature_pair=(feature_a, feature_b),
        errors=errors,
    )


# ---------------------------------------------------------------------------
# Grid exports. JSON is the self-describing form; CSV is a matrix with axis
# headers plus '#' metadata lines so both round-trip losslessly.
# ---------------------------------------------------------------------------


def grid_to_json(grid: ImpactGrid) -> str:
    payload = {
        "kind": grid.kind,
        "target": grid.target,
        "row_labels": list(grid.row_labels),
        "deltas": list(grid.deltas),
        "cells": [[None if math.isnan(v) else v for v in row] for row in grid.cells.tolist()],
        "window": {"start_index": grid.window_start, "length_steps": grid.window_len},
        "feature_pair": list(grid.feature_pair) if grid.feature_pair else None,
        "errors": grid.errors,
    }
    return json.dumps(payload, indent=2)


def grid_from_json(text: str) -> ImpactGrid:
    raw = json.loads(text)
    cells = np.array(
        [[math.nan if v is None else float(v) for v in row] for row in raw["cells"]]
    )
    return ImpactGrid(
        kind=raw["kind"],
        target=raw["target"],
        row_labels=tuple(raw["row_labels"]),
        deltas=tuple(raw["deltas"]),
        cells=cells,
        window_start=raw["window"]["start_index"],
        window_len=raw["window"]["length_steps"],
        feature_pair=tuple(raw["feature_pair"]) if raw.get("feature_pair") else None,
        errors=dict(raw.get("errors", {})),
    )


def grid_to_csv(grid: ImpactGrid) -> str:
    buffer = io.StringIO()
    buffer.write(f"# kind={grid.kind}\n")
    buffer.write(f"# target={grid.target}\n")
    buffer.write(f"# window_start={grid.window_start}\n")
    buffer.write(f"# window_len={grid.window_len}\n")
    if grid.feature_pair:
        buffer.write(f"# feature_pair={grid.feature_pair[0]},{grid.feature_pair[1]}\n")
    for key, message in grid.errors.items():
        buffer.write(f"# error {key}={message}\n")
    writer = csv.writer(buffer)
    axis = grid.feature_pair[0] if grid.feature_pair else "feature"
    writer.writerow([axis, *(repr(d) for d in grid.deltas)])
    for label, row in zip(grid.row_labels, grid.cells):
        writer.writerow([label, *("" if math.isnan(v) else repr(float(v)) for v in row)])
    return buffer.getvalue()


def grid_from_csv(text: str) -> ImpactGrid:
    meta: dict[str, str] = {}
    errors: dict[str, str] = {}
    data_lines: list[str] = []
    for line in text.splitlines():
        if line.startswith("# error "):
            key, _, message = line[len("# error ") :].partition("=")
            errors[key] = message
        elif line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value
        elif line.strip():
            data_lines.append(line)
    rows = list(csv.reader(io.StringIO("\n".join(data_lines))))
    deltas = tuple(float(v) for v in rows[0][1:])
    labels = tuple(r[0] for r in rows[1:])
    cells = np.array(
        [[math.nan if v == "" else float(v) for v in r[1:]] for r in rows[1:]]
    )
    pair = None
    if "feature_pair" in meta:
        a, _, b = meta["feature_pair"].partition(",")
        pair = (a, b)
    return ImpactGrid(
        kind=meta["kind"],
        target=meta["target"],
        row_labels=labels,
        deltas=deltas,
        cells=cells,
        window_start=int(meta["window_start"]),
        window_len=int(meta["window_len"]),
        feature_pair=pair,
        errors=errors,
    )
