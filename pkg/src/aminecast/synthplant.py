"""Synthetic capture-plant telemetry with known closed-form responses.

Every generated output is an explicit product of simple response terms on
the eight operational inputs, so sensitivity to any input perturbation has
an exact analytic value (`analytic_impact`). Inputs follow a sinusoid plus
AR(1) disturbance around a base level; outputs add optional white
measurement noise and an optional slow AR(1) drift factor.

Response term forms, with r = (x - ref) / ref and ref the input's base:
    power:  (x / ref) ** coef
    exp:    exp(-coef * r)
    affine: 1 + coef * r
An output y(t) = base * product(terms evaluated at x(t - delay)) *
(1 + drift(t)) + base * noise * eta(t).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Mapping, Sequence

import numpy as np

from .ingest import TimeSeriesFrame, parse_timestamp

TERM_FORMS = ("power", "exp", "affine")

# Campaign-era origin for generated timestamps (2020-11-01T00:00:00Z).
DEFAULT_START_EPOCH = parse_timestamp("2020-11-01T00:00:00Z")


class GeneratorError(Exception):
    """Invalid generator configuration or lookup."""


@dataclass(frozen=True)
class InputSignal:
    """Base level plus sinusoid and AR(1) disturbance for one input."""

    base: float
    amplitude: float = 0.0
    period_s: float = 86400.0
    ar_rho: float = 0.9
    noise: float = 0.0


@dataclass(frozen=True)
class ResponseTerm:
    """One multiplicative sensitivity of an output to an input."""

    input: str
    form: str
    coef: float
    delay_steps: int = 0


@dataclass(frozen=True)
class OutputChannel:
    """Closed-form output: base * product of terms, plus noise and drift."""

    base: float
    terms: tuple[ResponseTerm, ...]
    noise: float = 0.0
    drift_rho: float = 0.0
    drift_sigma: float = 0.0


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    days: float
    interval_s: int = 300
    inputs: Mapping[str, InputSignal] = field(default_factory=dict)
    outputs: Mapping[str, OutputChannel] = field(default_factory=dict)
    start_epoch: int = DEFAULT_START_EPOCH

    def __post_init__(self) -> None:
        if self.days <= 0:
            raise GeneratorError("days must be positive")
        if self.interval_s <= 0:
            raise GeneratorError("interval_s must be positive")
        for name, sig in self.inputs.items():
            if sig.base <= 0:
                raise GeneratorError(f"input {name!r} base must be positive")
            if not 0.0 <= sig.ar_rho < 1.0:
                raise GeneratorError(f"input {name!r} ar_rho must be in [0, 1)")
            if sig.noise < 0:
                raise GeneratorError(f"input {name!r} noise must be non-negative")
        for name, out in self.outputs.items():
            if out.base <= 0:
                raise GeneratorError(f"output {name!r} base must be positive")
            if out.noise < 0 or out.drift_sigma < 0:
                raise GeneratorError(f"output {name!r} noise scales must be non-negative")
            if not 0.0 <= out.drift_rho < 1.0:
                raise GeneratorError(f"output {name!r} drift_rho must be in [0, 1)")
            for term in out.terms:
                if term.input not in self.inputs:
                    raise GeneratorError(
                        f"output {name!r} references unknown input {term.input!r}"
                    )
                if term.form not in TERM_FORMS:
                    raise GeneratorError(f"unknown term form {term.form!r}")
                if term.delay_steps < 0:
                    raise GeneratorError("delay_steps must be non-negative")

    @property
    def rows(self) -> int:
        return int(round(self.days * 86400 / self.interval_s))

    @classmethod
    def default(cls, seed: int = 0, days: float = 23.0, interval_s: int = 300) -> "GeneratorConfig":
        """Demo plant: response signs mirror the qualitative sensitivities of
        a CESAR1-style absorber (lean solvent temperature inversely related
        to amine slip, upper wash temperature positively related, etc.).
        """
        inputs = {
            "fg_inlet_flow": InputSignal(50_000.0, 0.06, 86400.0, 0.9, 0.015),
            "fg_temp": InputSignal(30.0, 0.03, 43200.0, 0.9, 0.010),
            "lean_solvent_flow": InputSignal(120_000.0, 0.04, 64800.0, 0.9, 0.012),
            "lean_solvent_temp": InputSignal(37.0, 0.05, 57600.0, 0.9, 0.015),
            "upper_ww_flow": InputSignal(60_000.0, 0.04, 72000.0, 0.9, 0.012),
            "upper_ww_temp": InputSignal(25.0, 0.05, 50400.0, 0.9, 0.015),
            "lower_ww_flow": InputSignal(55_000.0, 0.03, 61200.0, 0.9, 0.010),
            "lower_ww_temp": InputSignal(22.0, 0.03, 46800.0, 0.9, 0.010),
        }
        tau = 6  # 30 min transport delay at 300 s
        outputs = {
            "amp_ftir": OutputChannel(
                120.0,
                (
                    ResponseTerm("fg_inlet_flow", "power", 0.8, tau),
                    ResponseTerm("lean_solvent_temp", "exp", 1.5, tau),
                    ResponseTerm("upper_ww_temp", "affine", 0.9, 0),
                ),
                noise=0.004,
            ),
            "amp_imr_ms": OutputChannel(
                100.0,
                (
                    ResponseTerm("fg_inlet_flow", "power", 0.3, tau),
                    ResponseTerm("lean_solvent_temp", "exp", 0.6, tau),
                    ResponseTerm("upper_ww_temp", "affine", 1.2, 0),
                    ResponseTerm("lower_ww_flow", "affine", -0.5, 0),
                ),
                noise=0.004,
            ),
            "pz_ftir": OutputChannel(
                30.0,
                (
                    ResponseTerm("fg_inlet_flow", "power", -1.5, tau),
                    ResponseTerm("lean_solvent_temp", "exp", 0.7, tau),
                    ResponseTerm("upper_ww_flow", "affine", -0.55, 0),
                ),
                noise=0.004,
            ),
            "pz_imr_ms": OutputChannel(
                25.0,
                (
                    ResponseTerm("upper_ww_flow", "affine", -0.5, 0),
                    ResponseTerm("lower_ww_flow", "affine", -0.35, 0),
                    ResponseTerm("lean_solvent_temp", "exp", 0.3, tau),
                ),
                noise=0.004,
            ),
            "co2_product_flow": OutputChannel(
                8000.0,
                (
                    ResponseTerm("lean_solvent_temp", "affine", -0.035, 0),
                    ResponseTerm("fg_inlet_flow", "power", 0.05, 0),
                ),
                noise=0.002,
            ),
            "absorber_outlet_temp": OutputChannel(
                45.0,
                (
                    ResponseTerm("fg_inlet_flow", "affine", -0.02, 0),
                    ResponseTerm("lean_solvent_temp", "affine", 0.015, 0),
                    ResponseTerm("upper_ww_temp", "affine", 0.004, 0),
                ),
                noise=0.002,
            ),
            "depleted_fg_temp": OutputChannel(
                28.0,
                (
                    ResponseTerm("upper_ww_flow", "affine", -0.15, 0),
                    ResponseTerm("lean_solvent_temp", "affine", 0.18, tau),
                    ResponseTerm("fg_inlet_flow", "affine", 0.05, 0),
                ),
                noise=0.002,
            ),
            "stripper_bottom_temp": OutputChannel(
                120.0,
                (
                    ResponseTerm("fg_inlet_flow", "affine", -0.025, 0),
                    ResponseTerm("lean_solvent_temp", "affine", 0.012, tau),
                    ResponseTerm("upper_ww_flow", "affine", -0.01, 0),
                ),
                noise=0.002,
            ),
        }
        return cls(seed=seed, days=days, interval_s=interval_s, inputs=inputs, outputs=outputs)


def _term_values(term: ResponseTerm, x: np.ndarray, ref: float) -> np.ndarray:
    r = (x - ref) / ref
    if term.form == "power":
        return (x / ref) ** term.coef
    if term.form == "exp":
        return np.exp(-term.coef * r)
    return 1.0 + term.coef * r


def _delayed(values: np.ndarray, delay: int) -> np.ndarray:
    """Shift back by `delay` steps; the first `delay` rows reuse row 0."""
    if delay == 0:
        return values
    out = np.empty_like(values)
    out[:delay] = values[0]
    out[delay:] = values[:-delay]
    return out


def closed_form_outputs(
    config: GeneratorConfig, input_columns: Mapping[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """Noise-free output values implied by the given input series."""
    out: dict[str, np.ndarray] = {}
    for name, channel in config.outputs.items():
        n = len(next(iter(input_columns.values())))
        y = np.full(n, channel.base, dtype=np.float64)
        for term in channel.terms:
            x = _delayed(np.asarray(input_columns[term.input], dtype=np.float64), term.delay_steps)
            y *= _term_values(term, x, config.inputs[term.input].base)
        out[name] = y
    return out


def generate(config: GeneratorConfig) -> TimeSeriesFrame:
    """Generate one telemetry frame. Fixed seed gives bit-identical frames."""
    n = config.rows
    rng = np.random.default_rng(config.seed)
    t = np.arange(n, dtype=np.float64) * config.interval_s

    # Draw noise in sorted column order so generation does not depend on
    # how the config mappings were built (e.g. after a JSON round-trip).
    inputs: dict[str, np.ndarray] = {}
    for name in sorted(config.inputs):
        sig = config.inputs[name]
        eps = np.zeros(n)
        if sig.noise > 0:
            eta = rng.standard_normal(n)
            # Stationary AR(1) start so early rows match the long-run spread.
            eps[0] = sig.noise * eta[0] / math.sqrt(1.0 - sig.ar_rho**2)
            for i in range(1, n):
                eps[i] = sig.ar_rho * eps[i - 1] + sig.noise * eta[i]
        wave = sig.amplitude * np.sin(2.0 * math.pi * t / sig.period_s)
        inputs[name] = sig.base * (1.0 + wave + eps)

    columns = {name: inputs[name] for name in config.inputs}
    clean = closed_form_outputs(config, inputs)
    for name in sorted(config.outputs):
        channel = config.outputs[name]
        y = clean[name].copy()
        if channel.drift_sigma > 0:
            drift = np.zeros(n)
            eta = rng.standard_normal(n)
            drift[0] = channel.drift_sigma * eta[0]
            for i in range(1, n):
                drift[i] = channel.drift_rho * drift[i - 1] + channel.drift_sigma * eta[i]
            y *= 1.0 + drift
        if channel.noise > 0:
            y = y + channel.base * channel.noise * rng.standard_normal(n)
        columns[name] = y

    timestamps = config.start_epoch + np.arange(n, dtype=np.int64) * config.interval_s
    return TimeSeriesFrame(
        timestamps,
        columns,
        config.interval_s,
        provenance=f"synthplant:seed={config.seed},days={config.days},interval={config.interval_s}s",
    )


def _term_ratio(term: ResponseTerm, delta: float) -> float:
    if term.form == "power":
        return (1.0 + delta) ** term.coef
    if term.form == "exp":
        return math.exp(-term.coef * delta)
    return 1.0 + term.coef * delta


def analytic_impact_multi(
    config: GeneratorConfig,
    interventions: Sequence[tuple[str, float]],
    output: str,
) -> float:
    """Exact steady-state percent change of `output` under joint input scaling."""
    if output not in config.outputs:
        raise GeneratorError(f"unknown output {output!r}")
    deltas: dict[str, float] = {}
    for feature, delta in interventions:
        if feature not in config.inputs:
            raise GeneratorError(f"unknown input {feature!r}")
        if abs(delta) > 0.20 + 1e-12:
            raise GeneratorError(f"delta {delta} outside the +/-20% range")
        if feature in deltas:
            raise GeneratorError(f"duplicate intervention on {feature!r}")
        deltas[feature] = delta
    ratio = 1.0
    for term in config.outputs[output].terms:
        if term.input in deltas:
            ratio *= _term_ratio(term, deltas[term.input])
    return 100.0 * (ratio - 1.0)


def analytic_impact(config: GeneratorConfig, feature: str, delta: float, output: str) -> float:
    """Single-input form of `analytic_impact_multi`."""
    return analytic_impact_multi(config, [(feature, delta)], output)


def config_to_json(config: GeneratorConfig) -> str:
    """Serialize the full coefficient set (the dataset's provenance sidecar)."""
    payload = {
        "seed": config.seed,
        "days": config.days,
        "interval_s": config.interval_s,
        "start_epoch": config.start_epoch,
        "inputs": {k: asdict(v) for k, v in config.inputs.items()},
        "outputs": {k: asdict(v) for k, v in config.outputs.items()},
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def config_from_json(text: str) -> GeneratorConfig:
    raw = json.loads(text)
    inputs = {k: InputSignal(**v) for k, v in raw["inputs"].items()}
    outputs = {}
    for k, v in raw["outputs"].items():
        terms = tuple(ResponseTerm(**t) for t in v.pop("terms"))
        outputs[k] = OutputChannel(terms=terms, **v)
    return GeneratorConfig(
        seed=raw["seed"],
        days=raw["days"],
        interval_s=raw["interval_s"],
        inputs=inputs,
        outputs=outputs,
        start_epoch=raw.get("start_epoch", DEFAULT_START_EPOCH),
    )
