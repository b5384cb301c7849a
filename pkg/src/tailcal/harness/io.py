"""Dataset files and result tables.

Datasets are JSON lines, one record per pair::

    {"y": 1.7, "forecast": "exponential(rate=0.8)", "covariates": {"delta": 0.8}, "threshold": 2.5}
    {"y": 0.0, "forecast": [0.1, 0.0, 2.3]}

``forecast`` is a distribution spec string or a list of ensemble members;
``covariates`` and ``threshold`` are optional.  Ensemble-only datasets may
also be CSV files with columns ``y, m1, ..., mK``; any further columns are
covariates, except ``threshold`` which is a per-pair threshold.

Floats are written with ``repr``, so writing the same pairs twice gives
byte-identical files and reading them back reproduces every value exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ..diagnostics import ForecastPairs
from ..dists import Distribution, Ensemble, Stacked, parse_specs
from ..errors import DatasetError, SpecParseError, TailcalError

PathLike = str | os.PathLike


# ---------------------------------------------------------------- datasets

def _number(value: Any, what: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DatasetError(f"{what} must be a number, got {value!r}", line)
    return float(value)


def _assemble(y, forecasts, lines, covariates, thresholds) -> ForecastPairs:
    """Build pairs from per-record forecasts (spec strings or member lists)."""
    n = len(y)
    spec_rows = [i for i, f in enumerate(forecasts) if isinstance(f, str)]
    by_size: dict[int, list[int]] = {}
    for i, f in enumerate(forecasts):
        if not isinstance(f, str):
            by_size.setdefault(len(f), []).append(i)
    groups: list[Distribution] = []
    positions: list[list[int]] = []
    if spec_rows:
        try:
            groups.append(parse_specs([forecasts[i] for i in spec_rows]))
        except SpecParseError as exc:
            line = None if exc.row is None else lines[spec_rows[exc.row]]
            raise DatasetError(f"bad forecast spec: {exc}", line) from exc
        positions.append(spec_rows)
    for rows in by_size.values():
        groups.append(Ensemble(np.array([forecasts[i] for i in rows], dtype=float)))
        positions.append(rows)
    forecast = groups[0] if len(groups) == 1 else Stacked(groups, positions)
    names = sorted({k for c in covariates for k in c})
    cov = {k: np.array([c.get(k, math.nan) for c in covariates]) for k in names}
    thr = np.array(thresholds, dtype=float) if any(not math.isnan(t) for t in thresholds) else None
    return ForecastPairs(forecast, np.array(y, dtype=float), cov, thr)


def read_jsonl(path: PathLike) -> ForecastPairs:
    """Read a JSON-lines dataset; errors name the offending line."""
    y: list[float] = []
    forecasts: list[Any] = []
    lines: list[int] = []
    covariates: list[dict[str, float]] = []
    thresholds: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON: {exc.msg}", line_no) from exc
            if not isinstance(rec, dict):
                raise DatasetError("record must be a JSON object", line_no)
            unknown = set(rec) - {"y", "forecast", "covariates", "threshold"}
            if unknown:
                raise DatasetError(f"unknown fields {sorted(unknown)}", line_no)
            if "y" not in rec or "forecast" not in rec:
                raise DatasetError("record needs 'y' and 'forecast'", line_no)
            yv = _number(rec["y"], "y", line_no)
            if not math.isfinite(yv):
                raise DatasetError("y must be finite", line_no)
            f = rec["forecast"]
            if isinstance(f, list):
                if not f:
                    raise DatasetError("ensemble forecast needs at least one member", line_no)
                f = [_number(v, "ensemble member", line_no) for v in f]
                if not all(math.isfinite(v) for v in f):
                    raise DatasetError("ensemble members must be finite", line_no)
            elif not isinstance(f, str):
                raise DatasetError("forecast must be a spec string or a list of members", line_no)
            cov = rec.get("covariates", {})
            if not isinstance(cov, dict):
                raise DatasetError("covariates must be an object of numbers", line_no)
            cov = {str(k): _number(v, f"covariate {k!r}", line_no) for k, v in cov.items()}
            thr = rec.get("threshold")
            thr = math.nan if thr is None else _number(thr, "threshold", line_no)
            if math.isinf(thr):
                raise DatasetError("threshold must be finite", line_no)
            y.append(yv)
            forecasts.append(f)
            lines.append(line_no)
            covariates.append(cov)
            thresholds.append(thr)
    if not y:
        raise DatasetError(f"{path}: dataset is empty")
    try:
        return _assemble(y, forecasts, lines, covariates, thresholds)
    except DatasetError:
        raise
    except TailcalError as exc:
        raise DatasetError(str(exc)) from exc


def read_ensemble_csv(path: PathLike) -> ForecastPairs:
    """Read a CSV of observations ``y`` and ensemble members ``m1..mK``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: dataset is empty") from None
        members = sorted((h for h in header if h[:1] == "m" and h[1:].isdigit()), key=lambda h: int(h[1:]))
        if "y" not in header or not members:
            raise DatasetError("CSV header needs a 'y' column and member columns m1..mK", 1)
        if [int(h[1:]) for h in members] != list(range(1, len(members) + 1)):
            raise DatasetError("member columns must be m1..mK without gaps", 1)
        col = {h: k for k, h in enumerate(header)}
        extra = [h for h in header if h != "y" and h not in members]
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"expected {len(header)} fields, got {len(row)}", line_no)
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise DatasetError(f"non-numeric field: {exc}", line_no) from exc
            if not all(math.isfinite(values[col[h]]) for h in ["y", *members]):
                raise DatasetError("y and members must be finite", line_no)
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: dataset is empty")
    table = np.array(rows)
    forecast = Ensemble(table[:, [col[h] for h in members]])
    cov = {h: table[:, col[h]] for h in extra if h != "threshold"}
    thr = table[:, col["threshold"]] if "threshold" in col else None
    return ForecastPairs(forecast, table[:, col["y"]], cov, thr)


def read_dataset(path: PathLike) -> ForecastPairs:
    """Read a dataset, choosing the format from the file extension."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    if path.suffix.lower() == ".csv":
        return read_ensemble_csv(path)
    return read_jsonl(path)


def _forecast_fields(forecast: Distribution) -> list[Any]:
    if isinstance(forecast, Ensemble):
        return forecast.members.tolist()
    return forecast.spec_rows()


def write_jsonl(path: PathLike, pairs: ForecastPairs) -> None:
    """Write pairs as JSON lines (ensembles as member lists)."""
    forecasts = _forecast_fields(pairs.forecast)
    y = pairs.y.tolist()
    names = sorted(pairs.covariates)
    cov = [pairs.covariates[k].tolist() for k in names]
    thr = None if pairs.thresholds is None else pairs.thresholds.tolist()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(pairs.n):
            rec: dict[str, Any] = {"y": y[i], "forecast": forecasts[i]}
            c = {k: v[i] for k, v in zip(names, cov) if not math.isnan(v[i])}
            if c:
                rec["covariates"] = c
            if thr is not None and not math.isnan(thr[i]):
                rec["threshold"] = thr[i]
            fh.write(json.dumps(rec, allow_nan=False))
            fh.write("\n")


def write_ensemble_csv(path: PathLike, pairs: ForecastPairs) -> None:
    """Write an ensemble dataset as CSV with columns ``y, m1..mK``."""
    if not isinstance(pairs.forecast, Ensemble):
        raise DatasetError("CSV datasets hold ensemble forecasts only")
    members = pairs.forecast.members
    names = sorted(pairs.covariates)
    cols = {"y": pairs.y, **{f"m{k + 1}": members[:, k] for k in range(members.shape[1])},
            **{k: pairs.covariates[k] for k in names}}
    if pairs.thresholds is not None:
        cols["threshold"] = pairs.thresholds
    write_table(path, cols)


# ---------------------------------------------------------------- tables

def format_cell(value: Any) -> str:
    """Text for one table cell: floats via ``repr``, None as empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path: PathLike, columns: Mapping[str, Sequence[Any]], comments: Sequence[str] = ()) -> None:
    """Write equal-length columns as CSV, preceded by ``# comment`` lines."""
    lengths = {len(v) for v in columns.values()}
    if len(lengths) > 1:
        raise ValueError("table columns must have equal length")
    n = lengths.pop() if lengths else 0
    cols = [list(v) for v in columns.values()]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(columns))
        for i in range(n):
            writer.writerow([format_cell(col[i]) for col in cols])


def read_table(path: PathLike) -> tuple[list[str], dict[str, list[str]]]:
    """Comment lines and raw string columns of a table written by ``write_table``."""
    comments: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        body = []
        for text in fh:
            if text.startswith("#"):
                comments.append(text[1:].strip())
            else:
                body.append(text)
    reader = csv.reader(body)
    header = next(reader)
    columns: dict[str, list[str]] = {h: [] for h in header}
    for row in reader:
        for h, cell in zip(header, row):
            columns[h].append(cell)
    return comments, columns


def float_column(cells: Sequence[str]) -> np.ndarray:
    """Parse a table column, with empty cells as NaN."""
    return np.array([float(c) if c != "" else math.nan for c in cells], dtype=float)
