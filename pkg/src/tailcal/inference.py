"""Delta-method confidence intervals and the KS / binomial tests.

All three ratio estimators are ratios of sample means ``mean(A) / mean(B)``
of per-pair terms, so the delta method gives the asymptotic variance
``var(A - R B) / mean(B)^2`` with ``R`` the estimate.  Plug-in moments use
``ddof = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from scipy import special, stats

from .diagnostics.curves import DENOMINATOR_CUTOFF, check_u_grid
from .diagnostics.pairs import ForecastPairs, TailSample, tail_sample
from .errors import (
    DegenerateDenominatorError, DegenerateNullError, DomainError, EmptyExceedanceError, InsufficientDataError,
)


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    lower: float
    upper: float
    std_error: float
    level: float
    degenerate: bool = False

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class TestReport:
    statistic: float
    p_value: float
    n: int
    null: str

    __test__ = False  # not a pytest class

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _z(level: float) -> float:
    if not 0 < level < 1:
        raise DomainError("confidence level must lie in (0, 1)")
    return float(special.ndtri(0.5 * (1 + level)))


def _sample(pairs: ForecastPairs, t: float | None) -> TailSample:
    if pairs.n < 2:
        raise InsufficientDataError("need at least two pairs for a confidence interval")
    return tail_sample(pairs, t)


def _ratio_ci(a: np.ndarray, b: np.ndarray, level: float) -> ConfidenceInterval:
    z = _z(level)
    n = a.shape[0]
    b_bar = b.mean()
    if b_bar * n < DENOMINATOR_CUTOFF:
        raise DegenerateDenominatorError("summed forecast exceedance probability is zero")
    est = a.mean() / b_bar
    resid = a - est * b
    var = float(np.mean((resid - resid.mean()) ** 2)) / b_bar**2
    se = math.sqrt(var / n)
    return ConfidenceInterval(float(est), float(est - z * se), float(est + z * se), se, level, var == 0.0)


def delta_ci_occurrence(pairs: ForecastPairs, t: float | None, level: float = 0.95) -> ConfidenceInterval:
    """Occurrence ratio with a delta-method interval.

    The variance is ``v' S v`` for the sample covariance ``S`` of
    ``(1{y_i > t}, 1 - F_i(t))`` and ``v = (1/B, -C/B^2)``.
    """
    ts = _sample(pairs, t)
    return _ratio_ci(ts.exceed.astype(float), ts.tail_prob, level)


def delta_ci_combined(pairs: ForecastPairs, t: float | None, u: float, level: float = 0.95) -> ConfidenceInterval:
    """Combined ratio at ``u`` with a delta-method interval.

    Numerator terms ``1{z_i <= u, y_i > t}``, denominator terms ``1 - F_i(t)``.
    """
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    ts = _sample(pairs, t)
    a = (ts.exceed & (np.nan_to_num(ts.z, nan=2.0) <= u)).astype(float)
    return _ratio_ci(a, ts.tail_prob, level)


def severity_variance(p1: float, p: float) -> float:
    """Asymptotic variance ``p1 (p - p1) / p^3`` of the severity ratio."""
    if p <= 0:
        raise EmptyExceedanceError("no exceedances")
    return p1 * (p - p1) / p**3


def delta_ci_severity(pairs: ForecastPairs, t: float | None, u: float, level: float = 0.95) -> ConfidenceInterval:
    """Severity curve at ``u`` (share of excess PITs ``<= u``) with a delta-method interval."""
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    ts = _sample(pairs, t)
    n = ts.n
    if ts.n_exceed == 0:
        raise EmptyExceedanceError("no observation exceeds the threshold")
    k = int(np.count_nonzero(ts.z[ts.exceed] <= u))
    p1, p = k / n, ts.n_exceed / n
    est = k / ts.n_exceed
    var = severity_variance(p1, p)
    se = math.sqrt(var / n)
    z = _z(level)
    return ConfidenceInterval(est, est - z * se, est + z * se, se, level, var == 0.0)


def delta_band(pairs: ForecastPairs, t: float | None, u_grid: Any, level: float = 0.95,
               kind: str = "combined") -> tuple[np.ndarray, np.ndarray]:
    """Pointwise delta-method band of the combined or severity curve on a grid."""
    u = check_u_grid(u_grid)
    ts = _sample(pairs, t)
    n = ts.n
    z = _z(level)
    order = np.argsort(ts.z[ts.exceed], kind="stable")
    zs = ts.z[ts.exceed][order]
    k = np.searchsorted(zs, u, side="right")
    if kind == "severity":
        if ts.n_exceed == 0:
            raise EmptyExceedanceError("no observation exceeds the threshold")
        p1, p = k / n, ts.n_exceed / n
        est = k / ts.n_exceed
        se = np.sqrt(p1 * (p - p1) / p**3 / n)
    elif kind == "combined":
        b = ts.tail_prob
        b_bar = b.mean()
        if b_bar * n < DENOMINATOR_CUTOFF:
            raise DegenerateDenominatorError("summed forecast exceedance probability is zero")
        a_bar = k / n
        est = a_bar / b_bar
        # moments of A - R B from cumulative sums, A being an indicator
        ab = np.concatenate([[0.0], np.cumsum(b[ts.exceed][order])])[k] / n
        second = a_bar - 2 * est * ab + est**2 * np.mean(b**2)
        var = np.maximum(second - (a_bar - est * b_bar) ** 2, 0.0) / b_bar**2
        se = np.sqrt(var / n)
    else:
        raise DomainError(f"unknown band kind {kind!r}")
    return est - z * se, est + z * se


def ks_uniform_test(values: Any) -> TestReport:
    """Two-sided Kolmogorov-Smirnov test of uniformity on (0, 1).

    The p-value is the asymptotic Kolmogorov survival function
    ``sum_k 2 (-1)^(k-1) exp(-2 k^2 lambda^2)`` at ``lambda = sqrt(n) D_n``.
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise InsufficientDataError("KS test needs at least one value")
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))
    p = float(np.clip(special.kolmogorov(math.sqrt(n) * d), 0.0, 1.0))
    return TestReport(d, p, n, "excess PITs ~ Uniform(0, 1), asymptotic Kolmogorov distribution")


def binomial_occurrence_test(pairs: ForecastPairs, t: float | None) -> TestReport:
    """Exact two-sided binomial test of the number of exceedances.

    Null: ``K ~ Binomial(n, p_bar)`` with ``p_bar`` the mean forecast
    exceedance probability; the p-value sums all outcomes no more likely than
    the observed one.
    """
    if pairs.n < 1:
        raise InsufficientDataError("binomial test needs at least one pair")
    ts = tail_sample(pairs, t)
    p_bar = ts.denominator / ts.n
    if not 0.0 < p_bar < 1.0:
        raise DegenerateNullError(f"mean exceedance probability {p_bar} gives a degenerate binomial null")
    res = stats.binomtest(ts.n_exceed, ts.n, p_bar, alternative="two-sided")
    return TestReport(float(ts.n_exceed), float(min(res.pvalue, 1.0)), ts.n, f"K ~ Binomial({ts.n}, {p_bar!r})")


def severity_ks_test(pairs: ForecastPairs, t: float | None) -> TestReport:
    """KS uniformity test applied to the excess PITs of the exceedances."""
    ts = tail_sample(pairs, t)
    return ks_uniform_test(ts.z[ts.exceed])
