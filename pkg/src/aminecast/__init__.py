"""Forecasting and what-if analysis engine for amine carbon-capture plant telemetry.

The package covers the full pipeline: telemetry ingestion and cleaning,
synthetic plant generation with analytic response oracles, lag/rolling
feature engineering, four LSTM-family forecasters on a small reverse-mode
autodiff core, multi-day forecasting, counterfactual intervention sweeps,
and a CLI plus HTTP service exposing all of it.
"""

__version__ = "0.1.0"
