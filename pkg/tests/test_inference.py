import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tailcal.diagnostics import ForecastPairs, tail_sample
from tailcal.dists import Exponential, Uniform
from tailcal.errors import DegenerateNullError, EmptyExceedanceError, InsufficientDataError
from tailcal.inference import (
    binomial_occurrence_test, delta_band, delta_ci_combined, delta_ci_occurrence, delta_ci_severity,
    ks_uniform_test, severity_variance,
)

Z95 = stats.norm.ppf(0.975)


def three_uniform_pairs():
    return ForecastPairs(Uniform(a=0, b=1), [0.2, 0.6, 0.9])


def ideal_exponential(rng, n, gamma=0.25):
    rate = rng.gamma(1 / gamma, gamma, n)
    return ForecastPairs(Exponential(rate=rate), rng.exponential(1 / rate))


def plug_in_ratio_variance(a, b):
    """Oracle: v' S v with the ddof=0 covariance of (a, b)."""
    cov = np.cov(np.vstack([a, b]), bias=True)
    v = np.array([1 / b.mean(), -a.mean() / b.mean() ** 2])
    return float(v @ cov @ v)


# ---------------------------------------------------------------- examples

def test_occurrence_ci_deterministic_forecast():
    pairs = three_uniform_pairs()
    ci = delta_ci_occurrence(pairs, 0.5, 0.95)
    g = 1 / 3  # share of y <= t
    var = g * (1 - g) / 0.5**2
    assert ci.estimate == pytest.approx(4 / 3)
    assert ci.std_error == pytest.approx(math.sqrt(var / 3), rel=1e-12)
    assert ci.upper - ci.estimate == pytest.approx(Z95 * math.sqrt(var / 3), rel=1e-9)


def test_combined_ci_three_point_dataset():
    pairs = three_uniform_pairs()
    ci = delta_ci_combined(pairs, 0.5, 0.5, 0.95)
    assert ci.estimate == pytest.approx(2 / 3)
    # hand computation: A = (0, 1, 0), B = (1/2, 1/2, 1/2) gives variance 8/9
    assert ci.std_error**2 * 3 == pytest.approx(8 / 9, rel=1e-12)
    oracle = plug_in_ratio_variance(np.array([0.0, 1.0, 0.0]), np.full(3, 0.5))
    assert ci.std_error**2 * 3 == pytest.approx(oracle, rel=1e-12)


def test_combined_ci_degenerate_when_no_small_pits():
    ci = delta_ci_combined(three_uniform_pairs(), 0.5, 0.1)
    assert ci.degenerate and ci.estimate == 0 and ci.lower == 0 and ci.upper == 0


def test_severity_variance_examples():
    assert severity_variance(0.25, 0.5) == pytest.approx(0.5)
    ci = delta_ci_severity(three_uniform_pairs(), 0.5, 1.0)
    assert ci.estimate == 1 and ci.lower == 1 and ci.upper == 1 and ci.degenerate
    with pytest.raises(EmptyExceedanceError):
        delta_ci_severity(three_uniform_pairs(), 0.95, 0.5)


def test_insufficient_data():
    with pytest.raises(InsufficientDataError):
        delta_ci_occurrence(ForecastPairs(Uniform(a=0, b=1), [0.7]), 0.5)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 200), q=st.floats(0.0, 0.95))
def test_combined_at_one_equals_occurrence(seed, n, q):
    rng = np.random.default_rng(seed)
    pairs = ideal_exponential(rng, n)
    t = float(np.quantile(pairs.y, q))
    occ = delta_ci_occurrence(pairs, t)
    comb = delta_ci_combined(pairs, t, 1.0)
    for a, b in [(occ.estimate, comb.estimate), (occ.lower, comb.lower), (occ.upper, comb.upper)]:
        assert abs(a - b) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 100))
def test_ratio_variance_matches_covariance_oracle(seed, n):
    rng = np.random.default_rng(seed)
    pairs = ideal_exponential(rng, n)
    t = float(np.median(pairs.y))
    ts = tail_sample(pairs, t)
    ci = delta_ci_occurrence(pairs, t)
    oracle = plug_in_ratio_variance(ts.exceed.astype(float), ts.tail_prob)
    assert ci.std_error**2 * n == pytest.approx(oracle, rel=1e-9, abs=1e-14)


def test_band_matches_pointwise_intervals():
    pairs = ideal_exponential(np.random.default_rng(3), 500)
    t = float(np.quantile(pairs.y, 0.7))
    u = np.linspace(0, 1, 11)
    lo, hi = delta_band(pairs, t, u, 0.9, "combined")
    slo, shi = delta_band(pairs, t, u, 0.9, "severity")
    for k, uk in enumerate(u):
        c = delta_ci_combined(pairs, t, uk, 0.9)
        s = delta_ci_severity(pairs, t, uk, 0.9)
        assert lo[k] == pytest.approx(c.lower, abs=1e-10) and hi[k] == pytest.approx(c.upper, abs=1e-10)
        assert slo[k] == pytest.approx(s.lower, abs=1e-12) and shi[k] == pytest.approx(s.upper, abs=1e-12)


def test_coverage_and_scaling_small_study():
    rng = np.random.default_rng(2024)
    t = (0.1**-0.25 - 1) / 0.25  # true 0.9-quantile of the GPD(1, 1/4) marginal
    hits = {"occ": 0, "comb": 0, "sev": 0}
    reps = 300
    for _ in range(reps):
        pairs = ideal_exponential(rng, 2000)
        hits["occ"] += delta_ci_occurrence(pairs, t).covers(1.0)
        hits["comb"] += delta_ci_combined(pairs, t, 0.5).covers(0.5)
        hits["sev"] += delta_ci_severity(pairs, t, 0.5).covers(0.5)
    for k, v in hits.items():
        assert 0.90 <= v / reps <= 0.99, k
    widths = []
    for n in (2500, 10000):
        w = [delta_ci_occurrence(ideal_exponential(rng, n), t) for _ in range(40)]
        widths.append(np.mean([c.upper - c.lower for c in w]))
    assert widths[0] / widths[1] == pytest.approx(2.0, rel=0.15)


# ------------------------------------------------------------------- tests

def test_ks_examples():
    assert ks_uniform_test([0.5]).statistic == 0.5
    x = np.linspace(0.1, 0.9, 9)
    # brute force: sup over a fine grid plus left limits at the jumps
    grid = np.linspace(0, 1, 100001)
    ecdf = np.searchsorted(x, grid, side="right") / 9
    left = np.searchsorted(x, x, side="left") / 9
    brute = max(np.max(np.abs(ecdf - grid)), np.max(np.abs(left - x)))
    assert ks_uniform_test(x).statistic == pytest.approx(brute, abs=1e-12)
    assert ks_uniform_test(x).statistic == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(InsufficientDataError):
        ks_uniform_test([])


def _kolmogorov_series(lam):
    if lam == 0:
        return 1.0
    total, k = 0.0, 1
    while True:
        term = 2 * (-1) ** (k - 1) * math.exp(-2 * k * k * lam * lam)
        total += term
        if abs(term) < 1e-12:
            return min(max(total, 0.0), 1.0)
        k += 1


@pytest.mark.parametrize("lam", [0.3, 0.5, 0.8, 1.0, 1.36, 1.63, 2.5, 4.0])
def test_ks_p_value_is_kolmogorov_series(lam):
    n = 400
    d = lam / math.sqrt(n)
    # midpoint grid shifted down so that the statistic is lam / sqrt(n)
    x = (np.arange(1, n + 1) - 0.5) / n
    x = np.clip(x - (d - 0.5 / n), 0, 1)
    rep = ks_uniform_test(x)
    lam_obs = rep.statistic * math.sqrt(n)
    assert rep.p_value == pytest.approx(_kolmogorov_series(lam_obs), abs=1e-10)
    assert rep.p_value == pytest.approx(stats.kstwobign.sf(lam_obs), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=50), st.floats(0.0, 0.3))
def test_ks_p_value_decreases_in_statistic(values, shift):
    a = ks_uniform_test(values)
    b = ks_uniform_test(np.clip(np.asarray(values) * (1 - shift), 0, 1))  # pulled toward 0
    if b.statistic > a.statistic:
        assert b.p_value <= a.p_value
    assert 0 <= a.p_value <= 1


def test_ks_on_uniform_samples():
    passes = sum(ks_uniform_test(np.random.default_rng(s).random(10**4)).p_value > 0.01 for s in range(200))
    assert passes >= 196


def test_binomial_examples():
    pairs = ForecastPairs(Uniform(a=0, b=1), [0.6, 0.7, 0.8])
    rep = binomial_occurrence_test(pairs, 0.5)
    assert rep.statistic == 3 and rep.p_value == pytest.approx(0.25)
    at_mode = ForecastPairs(Uniform(a=0, b=1), [0.1, 0.2, 0.6, 0.7])
    assert binomial_occurrence_test(at_mode, 0.5).p_value == pytest.approx(1.0)
    with pytest.raises(DegenerateNullError):
        binomial_occurrence_test(pairs, 1.5)
    rec = json.loads(rep.to_json())
    assert set(rec) == {"statistic", "p_value", "n", "null"}


@pytest.mark.parametrize("k,n,p", [(0, 10, 0.3), (7, 20, 0.2), (40, 100, 0.5), (1, 50, 0.01)])
def test_binomial_matches_enumeration(k, n, p):
    y = np.r_[np.full(k, 0.999999), np.full(n - k, 0.0)]
    pairs = ForecastPairs(Uniform(a=0, b=1), y)
    rep = binomial_occurrence_test(pairs, 1 - p)
    assert rep.statistic == k
    # oracle: sum the probabilities of all outcomes no more likely than the observed one
    p_bar = float(Uniform(a=0, b=1).sf(1 - p))
    pmf = stats.binom.pmf(np.arange(n + 1), n, p_bar)
    oracle = min(pmf[pmf <= pmf[k] * (1 + 1e-7)].sum(), 1.0)
    assert rep.p_value == pytest.approx(oracle, rel=1e-9)
