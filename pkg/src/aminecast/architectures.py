"""The four forecasting architectures, parameter counting, and model files.

Every model maps a (batch, window, features) block to one scalar per sample
through a single affine head. The model file format is fixed: magic bytes,
a version word, a canonical JSON header, the weight tensors as little-endian
float64 in the documented parameter order, and a trailing CRC32.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping

import numpy as np

from . import neuralcore as nc
from .features import FeatureConfig, ScalerState, fingerprint

ARCHITECTURES = ("basic", "stacked", "bi", "conv")

MAGIC = b"AMCMODEL"
FORMAT_VERSION = 1


class ArchitectureError(Exception):
    pass


class ModelFileError(Exception):
    """Base for model persistence failures."""


class ModelVersionError(ModelFileError):
    pass


class ModelChecksumError(ModelFileError):
    pass


class ModelTruncatedError(ModelFileError):
    pass


@dataclass(frozen=True)
class ModelDescriptor:
    """Architecture shape: everything needed to rebuild the weight tensors."""

    architecture: str
    input_dim: int
    hidden: int
    layers: int = 1
    kernel: int = 3

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ArchitectureError(f"unknown architecture {self.architecture!r}")
        if self.input_dim < 1 or self.hidden < 1:
            raise ArchitectureError("input_dim and hidden must be >= 1")
        if self.architecture == "stacked" and self.layers < 2:
            raise ArchitectureError("stacked models need at least 2 layers")
        if self.architecture != "stacked" and self.layers != 1:
            raise ArchitectureError("layers > 1 only applies to stacked models")
        if self.architecture == "conv":
            if self.kernel % 2 != 1 or self.kernel < 1:
                raise ArchitectureError("conv kernel must be odd and >= 1")


def param_count(descriptor: ModelDescriptor) -> int:
    """Exact trainable parameter total for the descriptor.

    basic:   4h(d+h+1) + (h+1)
    stacked: 4h(d+h+1) + (layers-1) * 4h(2h+1) + (h+1)
    bi:      8h(d+h+1) + (2h+1)
    conv:    4*hc*k*(c_in+hc) + 4*hc + (hc+1), with c_in = 1
    """
    d, h = descriptor.input_dim, descriptor.hidden
    cell = 4 * h * (d + h + 1)
    if descriptor.architecture == "basic":
        return cell + h + 1
    if descriptor.architecture == "stacked":
        upper = (descriptor.layers - 1) * 4 * h * (2 * h + 1)
        return cell + upper + h + 1
    if descriptor.architecture == "bi":
        return 2 * cell + 2 * h + 1
    k = descriptor.kernel
    conv = 4 * h * k * (1 + h) + 4 * h
    return conv + h + 1


@dataclass
class _Head:
    w: nc.Tensor
    b: nc.Tensor

    @classmethod
    def init(cls, in_dim: int, rng: np.random.Generator) -> "_Head":
        bound = 1.0 / np.sqrt(in_dim)
        return cls(
            nc.parameter(rng.uniform(-bound, bound, size=(in_dim, 1))),
            nc.parameter(np.zeros(1)),
        )

    def apply(self, x: nc.Tensor) -> nc.Tensor:
        out = nc.add(nc.matmul(x, self.w), self.b)
        return nc.reshape(out, (out.shape[0],))


class _ModelBase:
    descriptor: ModelDescriptor

    def parameters(self) -> dict[str, nc.Tensor]:
        raise NotImplementedError

    def forward(self, x: np.ndarray) -> nc.Tensor:
        raise NotImplementedError

    def predict(self, x: np.ndarray) -> np.ndarray:
        with nc.no_grad():
            return self.forward(x).data.copy()

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.descriptor.input_dim:
            raise ArchitectureError(
                f"expected (batch, window, {self.descriptor.input_dim}) input, got {x.shape}"
            )
        return x

    def weight_arrays(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.parameters().items()}

    def load_weight_arrays(self, weights: Mapping[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(weights) != set(params):
            raise ArchitectureError("weight names do not match this architecture")
        for name, p in params.items():
            arr = np.asarray(weights[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ArchitectureError(
                    f"weight {name!r} shape {arr.shape} != expected {p.data.shape}"
                )
            p.data = arr.copy()


class BasicLstm(_ModelBase):
    """Single cell over the window; head on the final hidden state."""

    def __init__(self, descriptor: ModelDescriptor, rng: np.random.Generator):
        self.descriptor = descriptor
        self.cell = nc.LstmCellParams.init(descriptor.input_dim, descriptor.hidden, rng)
        self.head = _Head.init(descriptor.hidden, rng)

    def parameters(self) -> dict[str, nc.Tensor]:
        return {
            "cell.W": self.cell.W,
            "cell.U": self.cell.U,
            "cell.b": self.cell.b,
            "head.w": self.head.w,
            "head.b": self.head.b,
        }

    def forward(self, x: np.ndarray) -> nc.Tensor:
        x = self._check_input(x)
        batch, steps, _ = x.shape
        h = nc.constant(np.zeros((batch, self.descriptor.hidden)))
        c = nc.constant(np.zeros((batch, self.descriptor.hidden)))
        for t in range(steps):
            h, c = nc.lstm_cell_step(self.cell, x[:, t, :], h, c)
        return self.head.apply(h)


class StackedLstm(_ModelBase):
    """Two or more cells; each layer consumes the previous hidden sequence."""

    def __init__(self, descriptor: ModelDescriptor, rng: np.random.Generator):
        self.descriptor = descriptor
        d, h = descriptor.input_dim, descriptor.hidden
        self.cells = [nc.LstmCellParams.init(d, h, rng)]
        for _ in range(descriptor.layers - 1):
            self.cells.append(nc.LstmCellParams.init(h, h, rng))
        self.head = _Head.init(h, rng)

    def parameters(self) -> dict[str, nc.Tensor]:
        out: dict[str, nc.Tensor] = {}
        for i, cell in enumerate(self.cells):
            out[f"cell{i}.W"] = cell.W
            out[f"cell{i}.U"] = cell.U
            out[f"cell{i}.b"] = cell.b
        out["head.w"] = self.head.w
        out["head.b"] = self.head.b
        return out

    def forward(self, x: np.ndarray) -> nc.Tensor:
        x = self._check_input(x)
        batch, steps, _ = x.shape
        hidden = self.descriptor.hidden
        sequence: list[nc.Tensor] = [nc.constant(x[:, t, :]) for t in range(steps)]
        final_h: nc.Tensor | None = None
        for cell in self.cells:
            h = nc.constant(np.zeros((batch, hidden)))
            c = nc.constant(np.zeros((batch, hidden)))
            next_sequence: list[nc.Tensor] = []
            for x_t in sequence:
                h, c = nc.lstm_cell_step(cell, x_t, h, c)
                next_sequence.append(h)
            sequence = next_sequence
            final_h = h
        assert final_h is not None
        return self.head.apply(final_h)


class BiLstm(_ModelBase):
    """Forward cell on the window, backward cell on the reversed window."""

    def __init__(self, descriptor: ModelDescriptor, rng: np.random.Generator):
        self.descriptor = descriptor
        d, h = descriptor.input_dim, descriptor.hidden
        self.fw = nc.LstmCellParams.init(d, h, rng)
        self.bw = nc.LstmCellParams.init(d, h, rng)
        self.head = _Head.init(2 * h, rng)

    def parameters(self) -> dict[str, nc.Tensor]:
        return {
            "fw.W": self.fw.W,
            "fw.U": self.fw.U,
            "fw.b": self.fw.b,
            "bw.W": self.bw.W,
            "bw.U": self.bw.U,
            "bw.b": self.bw.b,
            "head.w": self.head.w,
            "head.b": self.head.b,
        }

    def _run_direction(self, cell: nc.LstmCellParams, x: np.ndarray) -> nc.Tensor:
        batch, steps, _ = x.shape
        h = nc.constant(np.zeros((batch, self.descriptor.hidden)))
        c = nc.constant(np.zeros((batch, self.descriptor.hidden)))
        for t in range(steps):
            h, c = nc.lstm_cell_step(cell, x[:, t, :], h, c)
        return h

    def forward(self, x: np.ndarray) -> nc.Tensor:
        x = self._check_input(x)
        h_fw = self._run_direction(self.fw, x)
        h_bw = self._run_direction(self.bw, x[:, ::-1, :])
        return self.head.apply(nc.concat([h_fw, h_bw], axis=1))


class ConvLstm(_ModelBase):
    """Convolutional cell over the feature axis, averaged over positions.

    Each window row is treated as a one-channel 1-D signal of length d;
    the head consumes the position-averaged final hidden channels.
    """

    def __init__(self, descriptor: ModelDescriptor, rng: np.random.Generator):
        self.descriptor = descriptor
        self.cell = nc.ConvLstmCellParams.init(1, descriptor.hidden, descriptor.kernel, rng)
        self.head = _Head.init(descriptor.hidden, rng)

    def parameters(self) -> dict[str, nc.Tensor]:
        return {
            "cell.Wk": self.cell.Wk,
            "cell.Uk": self.cell.Uk,
            "cell.b": self.cell.b,
            "head.w": self.head.w,
            "head.b": self.head.b,
        }

    def forward(self, x: np.ndarray) -> nc.Tensor:
        x = self._check_input(x)
        batch, steps, d = x.shape
        hc = self.descriptor.hidden
        h = nc.constant(np.zeros((batch, hc, d)))
        c = nc.constant(np.zeros((batch, hc, d)))
        for t in range(steps):
            x_t = x[:, t, :].reshape(batch, 1, d)
            h, c = nc.conv_lstm_cell_step(self.cell, x_t, h, c)
        pooled = nc.mean_axis(h, axis=2)
        return self.head.apply(pooled)


_BUILDERS = {
    "basic": BasicLstm,
    "stacked": StackedLstm,
    "bi": BiLstm,
    "conv": ConvLstm,
}


def build(descriptor: ModelDescriptor, seed: int | np.random.Generator = 0) -> _ModelBase:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _BUILDERS[descriptor.architecture](descriptor, rng)


@dataclass
class TrainedModel:
    """A built model plus everything needed to run it on fresh telemetry."""

    descriptor: ModelDescriptor
    model: _ModelBase
    target: str
    input_columns: tuple[str, ...]
    interval_s: int
    feature_config: FeatureConfig
    scaler: ScalerState
    metadata: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.input_columns, self.target, self.interval_s, self.feature_config)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.model.predict(x)

    def predict_original(self, x: np.ndarray) -> np.ndarray:
        return self.scaler.invert(self.target, self.model.predict(x))


def _canonical_json(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_model(trained: TrainedModel, path: str | Path) -> None:
    """Write the model file; weights round-trip bit-exactly."""
    weights = trained.model.parameters()
    for name, p in weights.items():
        if not np.all(np.isfinite(p.data)):
            raise ModelFileError(f"weight {name!r} contains non-finite values")
    header = {
        "descriptor": asdict(trained.descriptor),
        "target": trained.target,
        "input_columns": list(trained.input_columns),
        "interval_s": trained.interval_s,
        "feature_config": asdict(trained.feature_config),
        "scaler": {"mins": dict(trained.scaler.mins), "maxs": dict(trained.scaler.maxs)},
        "metadata": trained.metadata,
        "weights": [
            {"name": name, "shape": list(p.data.shape)} for name, p in weights.items()
        ],
    }
    header_blob = _canonical_json(header)
    body = bytearray()
    body += MAGIC
    body += struct.pack("<I", FORMAT_VERSION)
    body += struct.pack("<Q", len(header_blob))
    body += header_blob
    for name, p in weights.items():
        body += np.ascontiguousarray(p.data, dtype="<f8").tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(body))


def load_model(path: str | Path) -> TrainedModel:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 16:
        raise ModelTruncatedError(f"{path} is too short to be a model file")
    if raw[: len(MAGIC)] != MAGIC:
        raise ModelFileError(f"{path} does not start with the model magic bytes")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    actual_crc = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ModelChecksumError(f"{path} failed its checksum")
    offset = len(MAGIC)
    version = struct.unpack_from("<I", raw, offset)[0]
    offset += 4
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"{path} has format version {version}, expected {FORMAT_VERSION}")
    header_len = struct.unpack_from("<Q", raw, offset)[0]
    offset += 8
    if offset + header_len > len(raw) - 4:
        raise ModelTruncatedError(f"{path} header is truncated")
    header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    offset += header_len

    descriptor = ModelDescriptor(**header["descriptor"])
    fc_raw = dict(header["feature_config"])
    fc_raw["rolling_windows"] = tuple(fc_raw["rolling_windows"])
    fc_raw["rolling_stats"] = tuple(fc_raw["rolling_stats"])
    feature_config = FeatureConfig(**fc_raw)
    scaler = ScalerState(header["scaler"]["mins"], header["scaler"]["maxs"])

    weights: dict[str, np.ndarray] = {}
    for entry in header["weights"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw) - 4:
            raise ModelTruncatedError(f"{path} weight block is truncated")
        weights[entry["name"]] = np.frombuffer(
            raw, dtype="<f8", count=count, offset=offset
        ).reshape(shape)
        offset += nbytes
    if offset != len(raw) - 4:
        raise ModelFileError(f"{path} has {len(raw) - 4 - offset} unexpected trailing bytes")

    model = build(descriptor, seed=0)
    model.load_weight_arrays(weights)
    return TrainedModel(
        descriptor=descriptor,
        model=model,
        target=header["target"],
        input_columns=tuple(header["input_columns"]),
        interval_s=header["interval_s"],
        feature_config=feature_config,
        scaler=scaler,
        metadata=header.get("metadata", {}),
    )
