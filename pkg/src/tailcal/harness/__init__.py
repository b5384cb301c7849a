"""Command line interface, dataset files, plots and figure recipes."""

from .io import (
    read_dataset, read_ensemble_csv, read_jsonl, read_table, write_ensemble_csv, write_jsonl, write_table,
)
from .pipeline import RunConfig, RunResult, Threshold, resolve_thresholds, run_diagnose, write_manifest
from .repro import FIGURES, run_figure
from .svg import Series, line_chart, render_table

__all__ = [
    "read_dataset", "read_jsonl", "read_ensemble_csv", "write_jsonl", "write_ensemble_csv", "read_table",
    "write_table", "RunConfig", "RunResult", "Threshold", "resolve_thresholds", "run_diagnose",
    "write_manifest", "FIGURES", "run_figure", "Series", "line_chart", "render_table",
]
