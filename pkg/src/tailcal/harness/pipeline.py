"""The diagnose workflow: thresholds in, CSV tables and SVG panels out."""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .. import __version__
from ..diagnostics import (
    BinPartition, ForecastPairs, binned_combined_ratio, binned_sup_distance_series, combined_ratio_curve,
    marginal_tail_curve, occurrence_ratio_series, severity_pp_curve, sup_distance_series,
    thresholds_from_quantiles,
)
from ..errors import DegenerateDenominatorError, DomainError, EmptyExceedanceError, TailcalError
from ..inference import binomial_occurrence_test, severity_ks_test
from .io import write_table
from .svg import render_table

DEGENERATE = (DegenerateDenominatorError, EmptyExceedanceError)
TEST_KINDS = ("ks", "binomial")


@dataclass(frozen=True)
class RunConfig:
    """Settings of one diagnose run.

    Exactly one of ``thresholds`` (raw values, ``-inf`` allowed) and
    ``quantile_levels`` (empirical quantiles of the observations) is used;
    ``standard`` adds ``t = -inf``, the ordinary PIT diagnostics.
    """

    thresholds: tuple[float, ...] = ()
    quantile_levels: tuple[float, ...] = ()
    standard: bool = False
    u_grid_size: int = 101
    ci_level: float | None = None
    bins_covariate: str | None = None
    n_bins: int = 3
    marginal_tail: bool = False
    grid_size: int = 50
    tests: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.thresholds and self.quantile_levels:
            raise DomainError("give raw thresholds or quantile levels, not both")
        if not (self.thresholds or self.quantile_levels):
            raise DomainError("the threshold list is empty")
        if any(math.isnan(t) or t == math.inf for t in self.thresholds):
            raise DomainError("raw thresholds must be finite or -inf")
        if any(not 0 < q < 1 for q in self.quantile_levels):
            raise DomainError("quantile levels must lie in (0, 1)")
        if self.ci_level is not None and not 0 < self.ci_level < 1:
            raise DomainError("ci level must lie in (0, 1)")
        if self.u_grid_size < 2 or self.grid_size < 2:
            raise DomainError("grid sizes must be at least 2")
        if self.n_bins < 1:
            raise DomainError("need at least one bin")
        if set(self.tests) - set(TEST_KINDS):
            raise DomainError(f"unknown test kinds {sorted(set(self.tests) - set(TEST_KINDS))}")

    @property
    def u_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.u_grid_size)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["thresholds"] = [float_text(t) for t in self.thresholds]
        return out


@dataclass(frozen=True)
class Threshold:
    label: str
    t: float
    level: float = math.nan


@dataclass
class RunResult:
    files: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    thresholds: list[Threshold] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return bool(self.warnings)


def float_text(x: float) -> str | float:
    """JSON-safe float: infinities as text."""
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def resolve_thresholds(config: RunConfig, y: np.ndarray) -> list[Threshold]:
    out = [Threshold("S", -math.inf)] if config.standard else []
    if config.quantile_levels:
        values = thresholds_from_quantiles(y, config.quantile_levels)
        out += [Threshold(f"q={q!r}", float(t), float(q)) for q, t in zip(config.quantile_levels, values)]
    for t in config.thresholds:
        out.append(Threshold("S", -math.inf) if t == -math.inf else Threshold(f"t={t!r}", float(t)))
    return out


def threshold_grid(config: RunConfig, y: np.ndarray, chosen: Sequence[Threshold]) -> tuple[np.ndarray, np.ndarray]:
    """Thresholds for the ratio-versus-threshold panels and their levels.

    Empirical quantiles at evenly spaced levels from 0 up to the highest
    requested level, merged with the requested finite thresholds.
    """
    finite = [c for c in chosen if math.isfinite(c.t)]
    if config.quantile_levels:
        top = max(config.quantile_levels)
    elif finite:
        top = float(np.mean(y <= max(c.t for c in finite)))
    else:
        top = 0.99
    top = min(max(top, 0.5), 1.0 - 1.0 / y.size) if y.size > 1 else 0.5
    levels = np.linspace(0.0, top, config.grid_size)
    grid = np.quantile(y, levels)
    t_all = np.concatenate([grid, [c.t for c in finite]])
    lev_all = np.concatenate([levels, [c.level if not math.isnan(c.level) else np.mean(y <= c.t)
                                       for c in finite]])
    t_all, first = np.unique(t_all, return_index=True)
    return t_all, lev_all[first]


def _header(pairs: ForecastPairs, chosen: Sequence[Threshold]) -> list[str]:
    lines = [f"n = {pairs.n}"]
    for c in chosen:
        lvl = "" if math.isnan(c.level) else f" (empirical {c.level!r}-quantile)"
        lines.append(f"threshold {c.label}: t = {float_text(c.t)}{lvl}")
    return lines


def _curve_table(pairs, chosen, config, which, result) -> dict[str, list]:
    fn = combined_ratio_curve if which == "combined" else severity_pp_curve
    u = config.u_grid
    cols: dict[str, list] = {k: [] for k in
                             ("label", "threshold", "u", "value", "lower", "upper", "n_exceedances", "degenerate")}
    for c in chosen:
        try:
            curve = fn(pairs, c.t, u, config.ci_level)
            values, lower, upper, n_exc, bad = curve.values, curve.lower, curve.upper, curve.n_exceedances, False
        except DEGENERATE as exc:
            values, lower, upper, n_exc, bad = np.full(u.shape, np.nan), None, None, 0, True
            result.warnings.append(f"{which} at threshold {c.label}: {exc}")
        cols["label"] += [c.label] * u.size
        cols["threshold"] += [c.t] * u.size
        cols["u"] += u.tolist()
        cols["value"] += values.tolist()
        cols["lower"] += [None] * u.size if lower is None else lower.tolist()
        cols["upper"] += [None] * u.size if upper is None else upper.tolist()
        cols["n_exceedances"] += [n_exc] * u.size
        cols["degenerate"] += [bad] * u.size
    return cols


def _emit(out: Path, name: str, columns, comments, result: RunResult) -> Path:
    path = out / name
    write_table(path, columns, comments)
    result.files.append(name)
    return path


def _render(result: RunResult, csv_path: Path, **kwargs) -> None:
    svg = render_table(csv_path, csv_path.with_suffix(".svg"), **kwargs)
    result.files.append(svg.name)


def run_diagnose(pairs: ForecastPairs, config: RunConfig, out_dir: Any, title: str = "") -> RunResult:
    """Write every requested diagnostic table plus SVG views into ``out_dir``.

    Degenerate thresholds (no exceedances or zero summed exceedance
    probability) give NaN rows flagged in a ``degenerate`` column and a
    warning; the remaining outputs are still written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = RunResult()
    if pairs.randomizer is None and not pairs.forecast.continuous:
        pairs = pairs.with_randomizer(np.random.default_rng(config.seed))
    chosen = resolve_thresholds(config, pairs.y)
    result.thresholds = chosen
    header = _header(pairs, chosen)
    prefix = f"{title}: " if title else ""
    band = ("lower", "upper") if config.ci_level is not None else None

    path = _emit(out, "combined.csv", _curve_table(pairs, chosen, config, "combined", result), header, result)
    _render(result, path, x="u", y="value", group="label", band=band, reference="diagonal",
            title=f"{prefix}combined ratio", xlabel="u", ylabel="combined ratio")
    path = _emit(out, "severity.csv", _curve_table(pairs, chosen, config, "severity", result), header, result)
    _render(result, path, x="u", y="value", group="label", band=band, reference="diagonal",
            title=f"{prefix}severity pp-plot", xlabel="u", ylabel="empirical cdf of excess PIT")

    grid, levels = threshold_grid(config, pairs.y, chosen)
    requested = {c.t for c in chosen}
    occ = occurrence_ratio_series(pairs, grid, config.ci_level)
    path = _emit(out, "occurrence.csv", {
        "threshold": grid.tolist(), "level": levels.tolist(), "value": occ.values.tolist(),
        "lower": [None] * grid.size if occ.lower is None else occ.lower.tolist(),
        "upper": [None] * grid.size if occ.upper is None else occ.upper.tolist(),
        "n_exceedances": occ.n_exceedances.tolist(), "degenerate": occ.degenerate.tolist(),
        "requested": [t in requested for t in grid.tolist()],
    }, header, result)
    _render(result, path, x="threshold", y="value", band=band, reference="one",
            title=f"{prefix}occurrence ratio", xlabel="threshold t", ylabel="occurrence ratio")

    sup = {"group": [], "threshold": [], "level": [], "value": [], "n_exceedances": [], "degenerate": []}

    def add_series(name, series):
        sup["group"] += [name] * grid.size
        sup["threshold"] += grid.tolist()
        sup["level"] += levels.tolist()
        sup["value"] += series.values.tolist()
        sup["n_exceedances"] += series.n_exceedances.tolist()
        sup["degenerate"] += series.degenerate.tolist()

    add_series("all", sup_distance_series(pairs, grid, config.u_grid))
    if config.bins_covariate is not None:
        name = config.bins_covariate
        if name not in pairs.covariates:
            raise DomainError(f"dataset has no covariate {name!r}; available: {sorted(pairs.covariates)}")
        partition = BinPartition.from_quantiles(pairs.covariates[name], config.n_bins, name)
        for j, series in enumerate(binned_sup_distance_series(pairs, partition, grid, config.u_grid)):
            add_series(f"bin {j + 1}", series)
        bins = {"label": [], "threshold": [], "bin": [], "u": [], "value": [], "n_exceedances": [],
                "degenerate": []}
        u = config.u_grid
        for c in chosen:
            for j, curve in enumerate(binned_combined_ratio(pairs, partition, c.t, u)):
                bins["label"] += [c.label] * u.size
                bins["threshold"] += [c.t] * u.size
                bins["bin"] += [j + 1] * u.size
                bins["u"] += u.tolist()
                bins["value"] += curve.values.tolist()
                bins["n_exceedances"] += [curve.n_exceedances] * u.size
                bins["degenerate"] += [curve.degenerate] * u.size
        edges = ", ".join(repr(float(e)) for e in partition.edges)
        _emit(out, "bins_combined.csv", bins, header + [f"bins: {config.n_bins} quantile bins of {name}, "
                                                         f"edges [{edges}]"], result)
    path = _emit(out, "sup_distance.csv", sup, header, result)
    _render(result, path, x="level", y="value", group="group",
            ylim=(0, None), title=f"{prefix}sup distance from the diagonal", xlabel="threshold quantile level",
            ylabel="max |R(u) - u|")

    if config.marginal_tail:
        tail = {"label": [], "threshold": [], "x": [], "observed": [], "forecast": []}
        for c in chosen:
            if not math.isfinite(c.t):
                continue
            excess = pairs.y[pairs.y > c.t] - c.t
            if excess.size == 0:
                result.warnings.append(f"marginal tail at threshold {c.label}: no exceedances")
                continue
            x = np.linspace(0.0, float(np.quantile(excess, 0.99)), 101)
            try:
                curve = marginal_tail_curve(pairs, c.t, x)
            except DEGENERATE as exc:
                result.warnings.append(f"marginal tail at threshold {c.label}: {exc}")
                continue
            tail["label"] += [c.label] * x.size
            tail["threshold"] += [c.t] * x.size
            tail["x"] += x.tolist()
            tail["observed"] += curve.observed.tolist()
            tail["forecast"] += curve.forecast.tolist()
        _emit(out, "marginal_tail.csv", tail, header, result)

    if config.tests:
        reports = []
        for c in chosen:
            for kind in config.tests:
                rec = {"label": c.label, "threshold": float_text(c.t), "kind": kind}
                try:
                    rep = severity_ks_test(pairs, c.t) if kind == "ks" else binomial_occurrence_test(pairs, c.t)
                    rec.update(asdict(rep))
                except TailcalError as exc:
                    rec["error"] = str(exc)
                reports.append(rec)
        path = out / "tests.json"
        path.write_text(json.dumps(reports, indent=2) + "\n", encoding="utf-8")
        result.files.append(path.name)
    return result


def sha256_file(path: Any) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path: Any, command: str, config: dict, seed: int | None,
                   inputs: Sequence[Any] = (), outputs: Sequence[Any] = (), extra: dict | None = None) -> Path:
    """Record what produced a set of outputs: command, settings, versions and hashes.

    Output names are relative to the manifest's directory.  There are no
    timestamps, so rerunning the same command reproduces the manifest too.
    """
    path = Path(path)
    manifest = {
        "tool": "tailcal",
        "version": __version__,
        "python": ".".join(map(str, sys.version_info[:3])),
        "numpy": np.__version__,
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(o): sha256_file(path.parent / o) for o in outputs},
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
