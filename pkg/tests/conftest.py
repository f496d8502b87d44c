"""Shared fixtures: the expensive trained models used by the acceptance suite."""

import sys

import pytest

from aminecast.features import FeatureConfig
from aminecast.ingest import PlantSchema
from aminecast.synthplant import (
    GeneratorConfig,
    InputSignal,
    OutputChannel,
    ResponseTerm,
    generate,
)
from aminecast.training import TrainConfig, fit_forecaster

SCHEMA = PlantSchema.default()

_ACCEPTANCE_LINES: list[str] = []


def announce(name: str, ok: bool, detail: str = "") -> None:
    """One pass/fail line per acceptance criterion.

    Lines are printed immediately (visible under -s) and repeated in the
    terminal summary, which survives pytest's output capture.
    """
    status = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {name}: {status}"
    if detail:
        line += f" ({detail})"
    _ACCEPTANCE_LINES.append(line)
    print(line, file=sys.__stdout__, flush=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def linear_plant_config(seed: int = 11, days: float = 16.0) -> GeneratorConfig:
    """Default plant with one purely linear channel: co2_product_flow is
    proportional to fg_inlet_flow, so every impact has the exact analytic
    value 100 * delta.
    """
    base = GeneratorConfig.default(seed=seed, days=days)
    inputs = dict(base.inputs)
    inputs["fg_inlet_flow"] = InputSignal(50_000.0, 0.20, 64800.0, 0.9, 0.005)
    outputs = dict(base.outputs)
    outputs["co2_product_flow"] = OutputChannel(
        8000.0, (ResponseTerm("fg_inlet_flow", "power", 1.0, 0),), noise=0.001
    )
    return GeneratorConfig(seed=seed, days=days, inputs=inputs, outputs=outputs)


def drifting_plant_config(seed: int, days: float) -> GeneratorConfig:
    """Default plant whose amp_ftir channel carries a slow near-random-walk
    drift, so open-loop feedback error grows with the forecast horizon.
    """
    base = GeneratorConfig.default(seed=seed, days=days)
    outputs = dict(base.outputs)
    channel = outputs["amp_ftir"]
    outputs["amp_ftir"] = OutputChannel(
        channel.base, channel.terms, noise=0.001, drift_rho=0.9995, drift_sigma=0.008
    )
    return GeneratorConfig(seed=seed, days=days, inputs=base.inputs, outputs=outputs)


@pytest.fixture(scope="session")
def e2e_model():
    """BasicLSTM on the 23-day moderate-noise plant (the flagship run)."""
    import time

    frame = generate(GeneratorConfig.default(seed=3, days=23))
    config = FeatureConfig.for_interval(300, input_window=12)
    tc = TrainConfig(
        batch_size=64, max_epochs=120, patience=10, learning_rate=2e-3, seed=0
    )
    started = time.monotonic()
    trained, result = fit_forecaster(
        frame, SCHEMA.input_columns, "amp_ftir", "basic", config, tc, hidden=32
    )
    elapsed = time.monotonic() - started
    return trained, frame, result, elapsed


@pytest.fixture(scope="session")
def linear_model():
    """Well-converged model of the linear channel, for the causal oracle."""
    config = linear_plant_config()
    frame = generate(config)
    fc = FeatureConfig(lag_steps=12, rolling_windows=(6,), input_window=6)
    tc = TrainConfig(
        batch_size=192, max_epochs=300, patience=50, learning_rate=7e-4, seed=1
    )
    trained, _ = fit_forecaster(
        frame, SCHEMA.input_columns, "co2_product_flow", "basic", fc, tc, hidden=64
    )
    return trained, frame, config


@pytest.fixture(scope="session")
def emission_model():
    """Moderately trained model of the exponential emission channel."""
    config = linear_plant_config()
    frame = generate(config)
    fc = FeatureConfig(lag_steps=12, rolling_windows=(6,), input_window=6)
    tc = TrainConfig(
        batch_size=128, max_epochs=60, patience=10, learning_rate=2e-3, seed=0
    )
    trained, _ = fit_forecaster(
        frame, SCHEMA.input_columns, "amp_ftir", "basic", fc, tc, hidden=24
    )
    return trained, frame, config


@pytest.fixture(scope="session")
def drift_model():
    """Target-lag model trained on the drifting plant, for horizon tests."""
    frame = generate(drifting_plant_config(100, 8))
    fc = FeatureConfig(
        lag_steps=12, rolling_windows=(6,), input_window=6, include_target_lags=True
    )
    tc = TrainConfig(
        batch_size=128, max_epochs=100, patience=15, learning_rate=2e-3, seed=0
    )
    trained, _ = fit_forecaster(
        frame, SCHEMA.input_columns, "amp_ftir", "basic", fc, tc, hidden=32
    )
    return trained
