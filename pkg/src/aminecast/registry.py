"""Filesystem registry for datasets and trained models.

A registry directory holds `registry.json` plus `datasets/` (CSV) and
`models/` (binary model files). Every entry records a SHA-256 digest that
is verified when the file is opened.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, asdict
from pathlib import Path

from .architectures import TrainedModel, load_model, save_model
from .ingest import (
    PlantSchema,
    TimeSeriesFrame,
    format_timestamp,
    load_csv,
    write_csv,
)

MANIFEST_NAME = "registry.json"


class RegistryError(Exception):
    pass


class UnknownIdError(RegistryError):
    pass


class DuplicateIdError(RegistryError):
    pass


class IntegrityError(RegistryError):
    """Stored digest does not match the file on disk."""


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class DatasetEntry:
    id: str
    path: str
    interval_s: int
    rows: int
    start: str
    end: str
    sha256: str
    provenance: str = ""


@dataclass
class ModelEntry:
    id: str
    path: str
    target: str
    architecture: str
    param_count: int
    sha256: str
    metrics: dict | None = None


class Registry:
    """Datasets and models under one root directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "datasets").mkdir(exist_ok=True)
        (self.root / "models").mkdir(exist_ok=True)
        self._datasets: dict[str, DatasetEntry] = {}
        self._models: dict[str, ModelEntry] = {}
        self._model_cache: dict[str, TrainedModel] = {}
        self._frame_cache: dict[str, TimeSeriesFrame] = {}
        self._load_manifest()

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def _load_manifest(self) -> None:
        if not self.manifest_path.exists():
            return
        raw = json.loads(self.manifest_path.read_text())
        self._datasets = {k: DatasetEntry(**v) for k, v in raw.get("datasets", {}).items()}
        self._models = {k: ModelEntry(**v) for k, v in raw.get("models", {}).items()}

    def _write_manifest(self) -> None:
        payload = {
            "datasets": {k: asdict(v) for k, v in self._datasets.items()},
            "models": {k: asdict(v) for k, v in self._models.items()},
        }
        tmp = self.manifest_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True))
        os.replace(tmp, self.manifest_path)

    # -- datasets -----------------------------------------------------------

    def add_dataset(self, dataset_id: str, frame: TimeSeriesFrame) -> DatasetEntry:
        if dataset_id in self._datasets:
            raise DuplicateIdError(f"dataset {dataset_id!r} already registered")
        rel = f"datasets/{dataset_id}.csv"
        path = self.root / rel
        write_csv(frame, path)
        entry = DatasetEntry(
            id=dataset_id,
            path=rel,
            interval_s=frame.interval_s,
            rows=len(frame),
            start=format_timestamp(frame.start),
            end=format_timestamp(frame.end),
            sha256=_sha256(path),
            provenance=frame.provenance,
        )
        self._datasets[dataset_id] = entry
        self._frame_cache[dataset_id] = frame
        self._write_manifest()
        return entry

    def get_dataset(self, dataset_id: str, schema: PlantSchema | None = None) -> TimeSeriesFrame:
        if dataset_id not in self._datasets:
            raise UnknownIdError(f"unknown dataset {dataset_id!r}")
        if dataset_id in self._frame_cache:
            return self._frame_cache[dataset_id]
        entry = self._datasets[dataset_id]
        path = self.root / entry.path
        if not path.exists():
            raise IntegrityError(f"dataset file {path} is missing")
        if _sha256(path) != entry.sha256:
            raise IntegrityError(f"dataset {dataset_id!r} failed its digest check")
        frame = load_csv(path, schema or PlantSchema.default())
        self._frame_cache[dataset_id] = frame
        return frame

    def datasets(self) -> list[DatasetEntry]:
        return sorted(self._datasets.values(), key=lambda e: e.id)

    # -- models -------------------------------------------------------------

    def add_model(
        self, model_id: str, trained: TrainedModel, metrics: dict | None = None
    ) -> ModelEntry:
        if model_id in self._models:
            raise DuplicateIdError(f"model {model_id!r} already registered")
        from .architectures import param_count

        rel = f"models/{model_id}.model"
        path = self.root / rel
        save_model(trained, path)
        entry = ModelEntry(
            id=model_id,
            path=rel,
            target=trained.target,
            architecture=trained.descriptor.architecture,
            param_count=param_count(trained.descriptor),
            sha256=_sha256(path),
            metrics=metrics,
        )
        self._models[model_id] = entry
        self._model_cache[model_id] = trained
        self._write_manifest()
        return entry

    def get_model(self, model_id: str) -> TrainedModel:
        if model_id not in self._models:
            raise UnknownIdError(f"unknown model {model_id!r}")
        if model_id in self._model_cache:
            return self._model_cache[model_id]
        entry = self._models[model_id]
        path = self.root / entry.path
        if not path.exists():
            raise IntegrityError(f"model file {path} is missing")
        if _sha256(path) != entry.sha256:
            raise IntegrityError(f"model {model_id!r} failed its digest check")
        trained = load_model(path)
        self._model_cache[model_id] = trained
        return trained

    def update_model_metrics(self, model_id: str, metrics: dict) -> None:
        if model_id not in self._models:
            raise UnknownIdError(f"unknown model {model_id!r}")
        self._models[model_id].metrics = metrics
        self._write_manifest()

    def models(self) -> list[ModelEntry]:
        return sorted(self._models.values(), key=lambda e: e.id)

    def next_model_id(self, target: str, architecture: str) -> str:
        base = f"{target}-{architecture}"
        n = 1
        while f"{base}-{n:03d}" in self._models:
            n += 1
        return f"{base}-{n:03d}"

    def next_dataset_id(self, prefix: str = "synth") -> str:
        n = 1
        while f"{prefix}-{n:03d}" in self._datasets:
            n += 1
        return f"{prefix}-{n:03d}"
