"""Empirical tail-calibration diagnostics: combined, occurrence and severity
ratios, their binned variants, and the marginal tail curve."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..errors import DegenerateDenominatorError, DomainError, EmptyExceedanceError
from .pairs import ForecastPairs, TailSample, tail_sample

# summed exceedance probabilities below this are treated as zero
DENOMINATOR_CUTOFF = 1e-12
DEFAULT_U_GRID = np.linspace(0.0, 1.0, 101)


@dataclass
class DiagnosticCurve:
    """A diagnostic evaluated on a grid of probabilities ``u``."""

    u_grid: np.ndarray
    values: np.ndarray
    kind: str
    threshold: float
    n_exceedances: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    degenerate: bool = False

    @property
    def has_band(self) -> bool:
        return self.lower is not None


@dataclass
class RatioSeries:
    """A scalar diagnostic evaluated on an increasing grid of thresholds."""

    thresholds: np.ndarray
    values: np.ndarray
    kind: str
    n_exceedances: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    degenerate: np.ndarray | None = None


@dataclass
class MarginalTailCurve:
    """Observed versus average-forecast conditional excess distribution."""

    x_grid: np.ndarray
    observed: np.ndarray
    forecast: np.ndarray
    threshold: float
    n_exceedances: int

    @property
    def difference(self) -> np.ndarray:
        return np.abs(self.observed - self.forecast)

    @property
    def sup_distance(self) -> float:
        return float(self.difference.max())


@dataclass
class BinPartition:
    """Assignment of pairs to ``n_bins`` disjoint bins (label -1: unused)."""

    labels: np.ndarray
    n_bins: int
    description: str = ""
    edges: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.n_bins < 1:
            raise DomainError("a partition needs at least one bin")
        if np.any((self.labels < -1) | (self.labels >= self.n_bins)):
            raise DomainError("bin labels must lie in -1..n_bins-1")

    @classmethod
    def from_breakpoints(cls, values: Any, breakpoints: Sequence[float], name: str = "") -> BinPartition:
        """Bins ``(-inf, b_1], (b_1, b_2], ..., (b_k, inf)`` of a covariate."""
        edges = np.asarray(breakpoints, dtype=float)
        if np.any(np.diff(edges) <= 0):
            raise DomainError("breakpoints must be strictly increasing")
        labels = np.searchsorted(edges, np.asarray(values, dtype=float), side="left")
        return cls(labels, len(edges) + 1, f"{name} breakpoints {edges.tolist()}", edges)

    @classmethod
    def from_quantiles(cls, values: Any, n_bins: int, name: str = "") -> BinPartition:
        """Equal-count bins split at empirical quantiles of a covariate."""
        values = np.asarray(values, dtype=float)
        edges = np.quantile(values, np.arange(1, n_bins) / n_bins)
        labels = np.searchsorted(edges, values, side="left")
        return cls(labels, n_bins, f"{name} {n_bins} quantile bins", edges)

    @classmethod
    def from_index_sets(cls, index_sets: Sequence[Sequence[int]], n: int) -> BinPartition:
        labels = np.full(n, -1, dtype=np.intp)
        for j, idx in enumerate(index_sets):
            idx = np.asarray(idx, dtype=np.intp)
            if np.any(labels[idx] >= 0) or len(np.unique(idx)) != len(idx):
                raise DomainError("bins must be mutually disjoint")
            labels[idx] = j
        return cls(labels, len(index_sets), "explicit index sets")

    def indices(self, j: int) -> np.ndarray:
        return np.nonzero(self.labels == j)[0]


def check_u_grid(u_grid: Any) -> np.ndarray:
    u = DEFAULT_U_GRID if u_grid is None else np.asarray(u_grid, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise DomainError("u grid must be a nonempty 1-D array")
    if np.any((u < 0) | (u > 1)) or np.any(np.diff(u) <= 0):
        raise DomainError("u grid must be increasing within [0, 1]")
    return u


def thresholds_from_quantiles(y: Any, levels: Sequence[float]) -> np.ndarray:
    """Empirical quantiles of the observations (linear interpolation)."""
    levels = np.asarray(levels, dtype=float)
    if np.any((levels <= 0) | (levels >= 1)):
        raise DomainError("quantile levels must lie in (0, 1)")
    return np.quantile(np.asarray(y, dtype=float), levels)


def _counts_below(sorted_z: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.searchsorted(sorted_z, u, side="right").astype(float)


def _require_denominator(ts: TailSample) -> float:
    den = ts.denominator
    if den < DENOMINATOR_CUTOFF:
        raise DegenerateDenominatorError(
            "every forecast gives (numerically) zero probability of exceeding the threshold"
        )
    return den


def _scalar_threshold(ts: TailSample, t: float | None) -> float:
    if t is not None:
        return float(t)
    return float(ts.t[0]) if np.all(ts.t == ts.t[0]) else math.nan


def _attach_band(curve: DiagnosticCurve, pairs, t, ci_level, which: str) -> DiagnosticCurve:
    if ci_level is None:
        return curve
    from ..inference import delta_band

    lower, upper = delta_band(pairs, t, curve.u_grid, ci_level, which)
    curve.lower, curve.upper = lower, upper
    return curve


def combined_ratio_curve(pairs: ForecastPairs, t: float | None, u_grid: Any = None,
                         ci_level: float | None = None) -> DiagnosticCurve:
    """Combined ratio ``sum_{y_i > t} 1{z_i <= u} / sum_i (1 - F_i(t))`` on a grid.

    ``t = -inf`` gives the pp-plot of ordinary PITs; ``t = None`` uses each
    pair's own threshold override.
    """
    u = check_u_grid(u_grid)
    ts = tail_sample(pairs, t)
    den = _require_denominator(ts)
    values = _counts_below(ts.sorted_pits(), u) / den
    curve = DiagnosticCurve(u, values, "combined", _scalar_threshold(ts, t), ts.n_exceed)
    return _attach_band(curve, pairs, t, ci_level, "combined")


def occurrence_ratio(pairs: ForecastPairs, t: float | None) -> float:
    """Observed exceedances over summed forecast exceedance probabilities."""
    ts = tail_sample(pairs, t)
    return ts.n_exceed / _require_denominator(ts)


def occurrence_ratio_series(pairs: ForecastPairs, thresholds: Sequence[float],
                            ci_level: float | None = None) -> RatioSeries:
    """Occurrence ratio on a threshold grid; degenerate points are NaN and flagged."""
    thr = np.asarray(thresholds, dtype=float)
    values = np.full(thr.shape, np.nan)
    counts = np.zeros(thr.shape, dtype=np.int64)
    degenerate = np.zeros(thr.shape, dtype=bool)
    lower = upper = None
    if ci_level is not None:
        lower, upper = np.full(thr.shape, np.nan), np.full(thr.shape, np.nan)
        from ..inference import delta_ci_occurrence
    for k, t in enumerate(thr):
        ts = tail_sample(pairs, t)
        counts[k] = ts.n_exceed
        if ts.denominator < DENOMINATOR_CUTOFF:
            degenerate[k] = True
            continue
        values[k] = ts.n_exceed / ts.denominator
        if ci_level is not None:
            ci = delta_ci_occurrence(pairs, t, ci_level)
            lower[k], upper[k] = ci.lower, ci.upper
    return RatioSeries(thr, values, "occurrence", counts, lower, upper, degenerate)


def severity_pp_curve(pairs: ForecastPairs, t: float | None, u_grid: Any = None,
                      ci_level: float | None = None) -> DiagnosticCurve:
    """Empirical cdf of the excess PITs of the exceedances."""
    u = check_u_grid(u_grid)
    ts = tail_sample(pairs, t)
    if ts.n_exceed == 0:
        raise EmptyExceedanceError("no observation exceeds the threshold")
    values = _counts_below(ts.sorted_pits(), u) / ts.n_exceed
    curve = DiagnosticCurve(u, values, "severity", _scalar_threshold(ts, t), ts.n_exceed)
    return _attach_band(curve, pairs, t, ci_level, "severity")


def sup_distance(curve: DiagnosticCurve) -> float:
    """``max_u |value(u) - u|`` over the curve's grid."""
    if curve.values.size == 0:
        raise DomainError("empty curve")
    return float(np.max(np.abs(curve.values - curve.u_grid)))


def binned_combined_ratio(pairs: ForecastPairs, partition: BinPartition, t: float | None,
                          u_grid: Any = None) -> list[DiagnosticCurve]:
    """Combined ratio computed within each bin.

    Bins that are empty or have zero summed exceedance probability yield a
    NaN curve with ``degenerate`` set; the other bins are unaffected.
    """
    u = check_u_grid(u_grid)
    if partition.labels.shape != (pairs.n,):
        raise DomainError("partition does not match the number of pairs")
    ts = tail_sample(pairs, t)
    curves = []
    for j in range(partition.n_bins):
        in_bin = partition.labels == j
        den = math.fsum(ts.tail_prob[in_bin])
        hits = in_bin & ts.exceed
        n_hit = int(np.count_nonzero(hits))
        if not in_bin.any() or den < DENOMINATOR_CUTOFF:
            curves.append(DiagnosticCurve(u, np.full(u.shape, np.nan), "combined",
                                          _scalar_threshold(ts, t), n_hit, degenerate=True))
            continue
        values = _counts_below(np.sort(ts.z[hits]), u) / den
        curves.append(DiagnosticCurve(u, values, "combined", _scalar_threshold(ts, t), n_hit))
    return curves


def sup_distance_series(pairs: ForecastPairs, thresholds: Sequence[float], u_grid: Any = None) -> RatioSeries:
    """Sup distance of the pooled combined ratio on a threshold grid."""
    thr = np.asarray(thresholds, dtype=float)
    values = np.full(thr.shape, np.nan)
    counts = np.zeros(thr.shape, dtype=np.int64)
    degenerate = np.zeros(thr.shape, dtype=bool)
    for k, t in enumerate(thr):
        try:
            curve = combined_ratio_curve(pairs, t, u_grid)
        except DegenerateDenominatorError:
            degenerate[k] = True
            continue
        values[k] = sup_distance(curve)
        counts[k] = curve.n_exceedances
    return RatioSeries(thr, values, "sup_distance", counts, degenerate=degenerate)


def binned_sup_distance_series(pairs: ForecastPairs, partition: BinPartition, thresholds: Sequence[float],
                               u_grid: Any = None) -> list[RatioSeries]:
    """Per-bin sup distance of the binned combined ratio across thresholds."""
    thr = np.asarray(thresholds, dtype=float)
    J = partition.n_bins
    values = np.full((J, thr.size), np.nan)
    counts = np.zeros((J, thr.size), dtype=np.int64)
    degenerate = np.zeros((J, thr.size), dtype=bool)
    for k, t in enumerate(thr):
        for j, curve in enumerate(binned_combined_ratio(pairs, partition, t, u_grid)):
            counts[j, k] = curve.n_exceedances
            degenerate[j, k] = curve.degenerate
            if not curve.degenerate:
                values[j, k] = sup_distance(curve)
    return [RatioSeries(thr, values[j], "sup_distance", counts[j], degenerate=degenerate[j]) for j in range(J)]


def marginal_tail_curve(pairs: ForecastPairs, t: float | None, x_grid: Any) -> MarginalTailCurve:
    """Compare the observed and mean-forecast conditional excess distributions.

    ``observed(x) = (#{t < y_i <= t + x} / n) / mean_i(1 - F_i(t))`` and
    ``forecast(x) = mean over exceedances of F_{i,t}(x)``.
    """
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size == 0 or np.any(x < 0):
        raise DomainError("x grid must be a nonempty 1-D array of nonnegative values")
    ts = tail_sample(pairs, t)
    if ts.n_exceed == 0:
        raise EmptyExceedanceError("no observation exceeds the threshold")
    den = _require_denominator(ts)
    excess = np.sort((pairs.y - ts.t)[ts.exceed])
    observed = np.searchsorted(excess, x, side="right") / den
    sub = pairs[ts.exceed]
    thr = ts.t[ts.exceed]
    s_t = ts.tail_prob[ts.exceed]
    with np.errstate(divide="ignore", invalid="ignore"):
        s_x = sub.forecast.sf(thr + x[:, None])
        f_tx = np.where(s_t > 0, 1.0 - s_x / np.where(s_t > 0, s_t, 1.0), 1.0)
    forecast = np.clip(f_tx, 0.0, 1.0).mean(axis=1)
    return MarginalTailCurve(x, observed, forecast, _scalar_threshold(ts, t), ts.n_exceed)
