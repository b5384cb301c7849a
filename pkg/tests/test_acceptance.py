"""Acceptance suite: ten end-to-end criteria at their stated tolerances.

Each test records a one-line PASS/FAIL verdict with the measured numbers
before asserting; the lines are printed together in the run summary.
"""

import time

import numpy as np
from scipy import integrate, stats
from conftest import ACCEPTANCE_LINES
from tailcal.diagnostics import (
    BinPartition, ForecastPairs, binned_combined_ratio, combined_ratio_curve, occurrence_ratio,
    severity_pp_curve, sup_distance,
)
from tailcal.dists import GPD, Ensemble, Exponential, Gamma, Mixture, Normal
from tailcal.inference import (
    binomial_occurrence_test, delta_ci_combined, delta_ci_occurrence, delta_ci_severity, severity_ks_test,
)
from tailcal.scoring import emos_fit, mixture_insensitivity_check
from tailcal.simlab import ScenarioSpec, generate

GAMMA = 0.25
# 0.9-quantile of the GPD(1, 1/4) marginal shared by the exponential trio
T90_TRUE = (0.1 ** -GAMMA - 1) / GAMMA


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def scenario(name: str, n: int, seed: int, **params):
    return generate(ScenarioSpec(name, n, seed, params))


def _random_dataset(rng: np.random.Generator) -> tuple[ForecastPairs, float]:
    n = int(rng.integers(20, 400))
    kind = rng.integers(4)
    if kind == 0:
        rate = rng.gamma(4.0, 0.25, n)
        pairs = ForecastPairs(Exponential(rate=rate), rng.exponential(1 / rate))
    elif kind == 1:
        mu = rng.normal(size=n)
        pairs = ForecastPairs(Normal(mu=mu, sigma=rng.uniform(0.5, 2.0, n)), mu + rng.normal(size=n))
    elif kind == 2:
        pairs = ForecastPairs(Mixture([0.3, 0.7], [GPD(sigma=1.0, xi=0.4), Gamma(shape=2.0, scale=1.0)]),
                              rng.gamma(2.0, 1.0, n))
    else:
        members = np.round(rng.normal(size=(n, 7)), 1)
        pairs = ForecastPairs(Ensemble(members), np.round(rng.normal(size=n), 1)).with_randomizer(rng)
    t = float(np.quantile(pairs.y, rng.uniform(0.3, 0.95)))
    return pairs, t


def test_decomposition_identity():
    grid = np.linspace(0.0, 1.0, 101)
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        pairs, t = _random_dataset(np.random.default_rng(seed))
        comb = combined_ratio_curve(pairs, t, grid).values
        product = occurrence_ratio(pairs, t) * severity_pp_curve(pairs, t, grid).values
        worst = max(worst, float(np.max(np.abs(comb - product))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    verdict(1, ok, f"max |combined - occurrence*severity| = {worst:.2e} over 100 datasets, {elapsed:.2f} s")
    assert worst <= 1e-12
    assert elapsed < 1.0


def test_tail_unfocused_ratios():
    start = time.perf_counter()
    pairs = scenario("tail-unfocused", 10**5, 0)["tail_unfocused"]
    tau = pairs.covariates["tau"]
    plus = occurrence_ratio(pairs[tau == 1.0], 2.0)
    minus = occurrence_ratio(pairs[tau == -1.0], 2.0)
    pooled = occurrence_ratio(pairs, 2.0)
    elapsed = time.perf_counter() - start
    ok = abs(plus - 2 / 3) <= 0.05 and abs(minus - 2) <= 0.05 and abs(pooled - 1) <= 0.03 and elapsed < 10
    verdict(2, ok, f"tau=+1 {plus:.4f} (2/3), tau=-1 {minus:.4f} (2), pooled {pooled:.4f} (1), {elapsed:.1f} s")
    assert abs(plus - 2 / 3) <= 0.05
    assert abs(minus - 2) <= 0.05
    assert abs(pooled - 1) <= 0.03
    assert elapsed < 10


def test_uniform_unfocused_severity():
    start = time.perf_counter()
    pairs = scenario("uniform-unfocused", 10**6, 0)["uniform_unfocused"]
    # the limit law (1 + u)/2 has a jump at u = 0, where an empirical cdf of continuous PITs is 0
    u_high = np.linspace(0.01, 1.0, 100)
    high = severity_pp_curve(pairs, 0.99, u_high).values
    err_high = float(np.max(np.abs(high - (1 + u_high) / 2)))
    u_mid = np.linspace(0.0, 1.0, 101)
    mid = severity_pp_curve(pairs, 0.5, u_mid).values
    err_mid = float(np.max(np.abs(mid - (0.5 * np.minimum(3 * u_mid, 1) + u_mid / 2))))
    elapsed = time.perf_counter() - start
    ok = err_high <= 0.03 and err_mid <= 0.02 and elapsed < 60
    verdict(3, ok, f"t=0.99 max error {err_high:.4f} (<=0.03), t=0.5 max error {err_mid:.4f} (<=0.02), "
                   f"{elapsed:.1f} s")
    assert err_high <= 0.03
    assert err_mid <= 0.02
    assert elapsed < 60


def test_exponential_trio():
    start = time.perf_counter()
    trio = scenario("exponential-trio", 10**6, 0, gamma=0.25, nu=1.4)
    y = trio["ideal"].y
    t90, t99 = np.quantile(y, [0.9, 0.99])
    sup = {(k, q): sup_distance(combined_ratio_curve(p, t)) for k, p in trio.items()
           for q, t in (("q0.9", t90), ("q0.99", t99))}
    # the binned comparison uses the 0.9 quantile: above the 0.99 quantile the
    # high-delta bin keeps too few exceedances for the ideal curve to settle
    partition = BinPartition.from_quantiles(trio["ideal"].covariates["delta"], 3, "delta")
    binned = {k: np.array([sup_distance(c) for c in binned_combined_ratio(trio[k], partition, t90)])
              for k in ("ideal", "climatological")}
    elapsed = time.perf_counter() - start
    calibrated_ok = all(sup[(k, q)] < 0.02 for k in ("ideal", "climatological") for q in ("q0.9", "q0.99"))
    extremist_ok = all(sup[("extremist", q)] >= 5 * max(sup[("ideal", q)], sup[("climatological", q)])
                       for q in ("q0.9", "q0.99"))
    ratios = binned["climatological"] / binned["ideal"]
    binned_ok = bool(np.all(ratios >= 10))
    ok = calibrated_ok and extremist_ok and binned_ok and elapsed < 300
    detail = ", ".join(f"{k} {q} {v:.4f}" for (k, q), v in sup.items())
    verdict(4, ok, f"sup distances: {detail}; per-bin climatological/ideal at q0.9 "
                   f"{np.array2string(ratios, precision=1)}; {elapsed:.0f} s")
    assert calibrated_ok
    assert extremist_ok
    assert binned_ok
    assert elapsed < 300


def misinformed_severity_at_half(t: float) -> float:
    """Exact P(Z <= 1/2 | Y > t) for the misinformed forecaster.

    Given Y > t the excess is Exp(D1) with D1 ~ Gamma(1/g, rate 1/g + t), so
    P(E > x) = (1 + x / (1/g + t))^(-1/g); Z <= 1/2 iff D2 E <= log 2.
    """
    a = 1 / GAMMA

    def integrand(d):
        return (1 + np.log(2) / (d * (a + t))) ** -a * stats.gamma.pdf(d, a, scale=GAMMA)

    return 1 - integrate.quad(integrand, 0, np.inf, limit=200)[0]


def test_misinformed_severity_vanishes():
    pairs = scenario("misinformed", 10**6, 0)["misinformed"]
    levels = (0.5, 0.9, 0.99)
    ts = np.quantile(pairs.y, levels)
    sev = [float(severity_pp_curve(pairs, t, [0.5]).values[0]) for t in ts]
    occ = [occurrence_ratio(pairs, t) for t in ts]
    exact = misinformed_severity_at_half(float(GPD(sigma=1.0, xi=GAMMA).quantile(0.99)))
    ok = sev[0] > sev[1] > sev[2] and sev[2] < 0.15 and all(abs(o - 1) <= 0.05 for o in occ)
    verdict(5, ok, "severity(0.5) " + " > ".join(f"{s:.4f}" for s in sev)
            + f" (required <0.15 at q0.99; exact finite-t value {exact:.4f}); occurrence "
            + ", ".join(f"{o:.4f}" for o in occ))
    assert sev[0] > sev[1] > sev[2]
    assert abs(sev[2] - exact) < 0.01
    assert all(abs(o - 1) <= 0.05 for o in occ)
    assert sev[2] < 0.15, "the exact severity at the 0.99 quantile exceeds 0.15; see the decisions ledger"
    assert all(abs(o - 1) <= 0.05 for o in occ)


def test_gpd_tail_matching():
    matched = scenario("gpd-pair", 10**6, 0)["gpd_pair"]
    light = scenario("gpd-pair", 10**6, 0, eta=0.0)["gpd_pair"]
    wide = scenario("gpd-pair", 10**6, 0, sigma_f=1.2)["gpd_pair"]

    checks = []
    for q in (0.9, 0.99):
        t = float(np.quantile(matched.y, q))
        checks += [sup_distance(combined_ratio_curve(matched, t)), sup_distance(severity_pp_curve(matched, t)),
                   abs(occurrence_ratio(matched, t) - 1)]
    matched_ok = max(checks) < 0.02

    t99 = float(np.quantile(light.y, 0.99))
    light_ratio = occurrence_ratio(light, t99)
    light_ok = light_ratio < 0.5

    # a scale mismatch with equal shapes fades as t grows (sigma_F(t)/sigma_Y(t) -> 1),
    # so the severity check sits at the 0.9 quantile where the mismatch is still visible
    t90 = float(np.quantile(wide.y, 0.9))
    wide_p = severity_ks_test(wide, t90).p_value
    wide_ok = wide_p < 1e-3

    verdict(6, matched_ok and light_ok and wide_ok,
            f"matched max sup distance {max(checks):.4f} (<0.02); eta=0 occurrence ratio at q0.99 "
            f"{light_ratio:.2f} (required <0.5; reciprocal {1 / light_ratio:.4f}); sigma_F=1.2 severity KS p "
            f"at q0.9 {wide_p:.2e} (<1e-3)")
    assert matched_ok
    assert wide_ok
    assert light_ok, (
        "observed/forecast exceedance ratio of a light-tailed forecast grows without bound; "
        "see the decisions ledger"
    )


def test_delta_method_coverage():
    start = time.perf_counter()
    hits = np.zeros(3)
    reps = 1000
    for seed in range(reps):
        pairs = scenario("exponential-trio", 10**4, seed)["ideal"]
        hits += [
            delta_ci_occurrence(pairs, T90_TRUE).covers(1.0),
            delta_ci_combined(pairs, T90_TRUE, 0.5).covers(0.5),
            delta_ci_severity(pairs, T90_TRUE, 0.5).covers(0.5),
        ]
    coverage = hits / reps
    elapsed = time.perf_counter() - start
    ok = bool(np.all((coverage >= 0.93) & (coverage <= 0.97))) and elapsed < 600
    verdict(7, ok, f"coverage occurrence {coverage[0]:.3f}, combined {coverage[1]:.3f}, "
                   f"severity {coverage[2]:.3f} (in [0.93, 0.97]); {elapsed:.0f} s")
    assert np.all((coverage >= 0.93) & (coverage <= 0.97))
    assert elapsed < 600


def test_test_calibration():
    ks_reject = binom_reject = 0
    runs = 200
    for seed in range(runs):
        pairs = scenario("exponential-trio", 10**4, 10**5 + seed)["ideal"]
        ks_reject += severity_ks_test(pairs, T90_TRUE).p_value < 0.05
        binom_reject += binomial_occurrence_test(pairs, T90_TRUE).p_value < 0.05
    ks_rate, binom_rate = ks_reject / runs, binom_reject / runs
    extremist = scenario("exponential-trio", 10**5, 0)["extremist"]
    ks_p = severity_ks_test(extremist, T90_TRUE).p_value
    binom_p = binomial_occurrence_test(extremist, T90_TRUE).p_value
    ok = 0.02 <= ks_rate <= 0.09 and 0.02 <= binom_rate <= 0.09 and ks_p < 1e-3 and binom_p < 1e-3
    verdict(8, ok, f"ideal rejection rates KS {ks_rate:.3f}, binomial {binom_rate:.3f} (in [0.02, 0.09]); "
                   f"extremist p-values KS {ks_p:.1e}, binomial {binom_p:.1e} (<1e-3)")
    assert 0.02 <= ks_rate <= 0.09
    assert 0.02 <= binom_rate <= 0.09
    assert ks_p < 1e-3
    assert binom_p < 1e-3


def test_scoring_misses_wrong_tail():
    g, h = GPD(sigma=1.0, xi=0.25), GPD(sigma=1.0, xi=0.5)
    rows = mixture_insensitivity_check(g, h, [0.5, 0.1, 0.01, 0.001], n=2 * 10**5, seed=0)
    gaps = [r.gap for r in rows]
    monotone = all(a > b for a, b in zip(gaps, gaps[1:]))
    bound_ok = all(r.holds(3.0) for r in rows)

    # the same forecast F_0.01 fails the occurrence check far in the tail
    rng = np.random.default_rng(0)
    y = g.sample(rng, 10**7)
    t = float(g.quantile(1 - 1e-5))
    pairs = ForecastPairs(Mixture([0.01, 0.99], [h, g]), y)
    ratio = occurrence_ratio(pairs, t)
    ci = delta_ci_occurrence(pairs, t)
    binom_p = binomial_occurrence_test(pairs, t).p_value
    detected = binom_p < 1e-3 and not ci.covers(1.0)

    table = "; ".join(f"lam={r.lam:g} gap {r.gap:.2e} bound {r.bound:.2e}" for r in rows)
    verdict(9, monotone and bound_ok and detected,
            f"{table}; F_0.01 at t={t:.1f}: occurrence ratio {ratio:.3f} "
            f"[{ci.lower:.3f}, {ci.upper:.3f}], binomial p {binom_p:.1e}")
    assert monotone
    assert bound_ok
    assert detected


def test_emos_self_consistency():
    truth = np.array([0.0, 1.0, 1.0, 0.0])
    first = None
    passes = recovered = 0
    seeds = 50
    for seed in range(seeds):
        train = scenario("ensemble-emos", 2000, seed)["raw_ensemble"]
        model = emos_fit(train.covariates["ens_mean"], train.covariates["ens_sd"], train.y)
        err = float(np.max(np.abs(np.array(model.coefficients) - truth)))
        first = err if first is None else first
        recovered += err <= 0.1
        test = scenario("ensemble-emos", 2000, 10**6 + seed)["raw_ensemble"]
        fitted = test.with_forecast(model.predict(test.covariates["ens_mean"], test.covariates["ens_sd"]))
        t = float(np.quantile(test.y, 0.9))
        passes += severity_ks_test(fitted, t).p_value > 0.01
    rate = passes / seeds
    ok = first <= 0.1 and rate >= 0.9
    verdict(10, ok, f"seed-0 max coefficient error {first:.3f} (<=0.1; {recovered}/{seeds} seeds within 0.1); "
                    f"held-out severity KS p > 0.01 in {rate:.0%} of seeds (>=90%)")
    assert first <= 0.1
    assert rate >= 0.9
