"""Tail-calibration diagnostics for probabilistic forecasts of extreme events."""

__version__ = "0.1.0"
