"""HTTP API over the registry: forecasting, what-if, and sweep endpoints.

Versioned under /api/v1. Bodies are JSON; floats serialize via Python repr,
which round-trips float64 exactly. Every error body carries a machine
readable code, a human message, and the offending field when one exists.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import causal
from .forecast import FingerprintMismatchError, ForecastError, forecast
from .ingest import format_timestamp
from .registry import Registry, UnknownIdError

MAX_SWEEP_CELLS = 81


class WindowBody(BaseModel):
    start_index: int = Field(ge=0)
    length_steps: int = Field(ge=1)


class InterventionBody(BaseModel):
    feature: str
    # Fractional delta; the +/-20% bound mirrors the sweep range.
    delta_pct: float = Field(ge=-0.20, le=0.20)


class WhatIfBody(BaseModel):
    model_id: str
    dataset_id: str
    window: WindowBody
    interventions: list[InterventionBody] = Field(default_factory=list, max_length=2)


class ForecastBody(BaseModel):
    model_id: str
    dataset_id: str
    start_index: int = Field(ge=0)
    horizon_steps: int = Field(ge=1)
    mode: Literal["exogenous", "autoregressive"] = "exogenous"


class SweepBody(BaseModel):
    model_id: str
    dataset_id: str
    window: WindowBody
    feature: str | None = None
    feature_pair: tuple[str, str] | None = None


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    body: dict = {"error": {"code": code, "message": message}}
    if field is not None:
        body["error"]["field"] = field
    return JSONResponse(status_code=status, content=body)


def _field_path(loc: tuple) -> str:
    parts = [p for p in loc if p != "body"]
    path = ""
    for part in parts:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path = f"{path}.{part}" if path else str(part)
    return path


def _series(values: np.ndarray) -> list[float]:
    return [float(v) for v in values]


def _grid_payload(grid: causal.ImpactGrid) -> dict:
    return {
        "kind": grid.kind,
        "target": grid.target,
        "row_labels": list(grid.row_labels),
        "deltas": list(grid.deltas),
        "cells": [
            [None if math.isnan(v) else float(v) for v in row] for row in grid.cells.tolist()
        ],
        "window": {"start_index": grid.window_start, "length_steps": grid.window_len},
        "feature_pair": list(grid.feature_pair) if grid.feature_pair else None,
        "errors": grid.errors,
    }


def create_app(registry: Registry, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="aminecast", version="1")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        first = exc.errors()[0]
        return _error(
            422,
            "invalid_request",
            first.get("msg", "invalid request"),
            _field_path(tuple(first.get("loc", ()))),
        )

    @app.exception_handler(UnknownIdError)
    async def unknown_id_handler(request: Request, exc: UnknownIdError):
        return _error(404, "unknown_id", str(exc))

    @app.exception_handler(FingerprintMismatchError)
    async def fingerprint_handler(request: Request, exc: FingerprintMismatchError):
        return _error(409, "fingerprint_mismatch", str(exc))

    @app.exception_handler(causal.UnknownFeatureError)
    async def unknown_feature_handler(request: Request, exc: causal.UnknownFeatureError):
        return _error(422, "unknown_feature", str(exc), "interventions")

    @app.exception_handler(causal.CausalError)
    async def causal_handler(request: Request, exc: causal.CausalError):
        return _error(422, "invalid_intervention", str(exc))

    @app.exception_handler(ForecastError)
    async def forecast_handler(request: Request, exc: ForecastError):
        return _error(422, "invalid_forecast", str(exc))

    @app.get("/api/v1/models")
    def list_models() -> list[dict]:
        return [
            {
                "id": e.id,
                "target": e.target,
                "architecture": e.architecture,
                "param_count": e.param_count,
                "metrics": e.metrics,
            }
            for e in registry.models()
        ]

    @app.get("/api/v1/datasets")
    def list_datasets() -> list[dict]:
        return [
            {
                "id": e.id,
                "interval_s": e.interval_s,
                "rows": e.rows,
                "start": e.start,
                "end": e.end,
                "provenance": e.provenance,
            }
            for e in registry.datasets()
        ]

    @app.post("/api/v1/forecast")
    def run_forecast(body: ForecastBody) -> dict:
        model = registry.get_model(body.model_id)
        frame = registry.get_dataset(body.dataset_id)
        result = forecast(model, frame, body.start_index, body.horizon_steps, body.mode)
        return {
            "model_id": body.model_id,
            "dataset_id": body.dataset_id,
            "target": result.target,
            "mode": result.mode,
            "start_index": result.start,
            "horizon_steps": result.horizon_steps,
            "timestamps": [format_timestamp(t) for t in result.timestamps],
            "predicted": _series(result.predicted),
            "actual": None if result.actual is None else _series(result.actual),
        }

    @app.post("/api/v1/whatif")
    def run_whatif(body: WhatIfBody) -> dict:
        model = registry.get_model(body.model_id)
        frame = registry.get_dataset(body.dataset_id)
        window = body.window
        if body.interventions:
            spec = causal.InterventionSpec(
                tuple(causal.Intervention(iv.feature, iv.delta_pct) for iv in body.interventions),
                window.start_index,
                window.length_steps,
            )
            detail = causal.impact_detail(model, frame, spec)
        else:
            # No interventions: counterfactual equals the baseline forecast.
            detail = causal.baseline_window(
                model, frame, window.start_index, window.length_steps
            )
        baseline, counterfactual = detail.baseline, detail.counterfactual
        impact_pct = detail.impact_pct
        timestamps = detail.timestamps
        return {
            "model_id": body.model_id,
            "dataset_id": body.dataset_id,
            "target": model.target,
            "window": {"start_index": window.start_index, "length_steps": window.length_steps},
            "interventions": [
                {"feature": iv.feature, "delta_pct": iv.delta_pct} for iv in body.interventions
            ],
            "timestamps": [format_timestamp(t) for t in timestamps],
            "baseline": _series(baseline),
            "counterfactual": _series(counterfactual),
            "impact_pct": float(impact_pct),
        }

    @app.post("/api/v1/sweep")
    def run_sweep(body: SweepBody) -> dict:
        model = registry.get_model(body.model_id)
        frame = registry.get_dataset(body.dataset_id)
        window = body.window
        if body.feature_pair is not None:
            cell_count = len(causal.DELTA_GRID) ** 2
        else:
            rows = 1 if body.feature else len(model.input_columns)
            cell_count = rows * len(causal.DELTA_GRID)
        if cell_count > MAX_SWEEP_CELLS:
            return _error(422, "sweep_too_large", f"{cell_count} cells exceed {MAX_SWEEP_CELLS}")
        if body.feature_pair is not None:
            grid = causal.sweep_pair(
                model, frame, body.feature_pair[0], body.feature_pair[1],
                window.start_index, window.length_steps,
            )
        else:
            features = (body.feature,) if body.feature else None
            grid = causal.sweep_single(
                model, frame, window.start_index, window.length_steps, features
            )
        return _grid_payload(grid)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
