import json
import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tailcal.dists import (
    GEV, GPD, CensoredBelow, Ensemble, Exponential, Gamma, Logistic, Mixture, Normal, Piecewise, Scaled, Shifted,
    Uniform, parse_specs,
)
from tailcal.errors import (
    DegeneratePredictorError, DivergentScoreError, InitializationError, InsufficientDataError,
)
from tailcal.scoring import (
    EmosModel, crps, emos_fit, ensemble_statistics, expected_score, lower_square_integral,
    mixture_insensitivity_check, nelder_mead, pair_mean_distance,
)
from tailcal.simlab import ScenarioSpec, generate


def quad_crps(dist, y):
    """Oracle: integrate (F(x) - 1{y <= x})^2 with scipy, split at y and the kinks."""
    f = lambda x: (np.asarray(dist.cdf(x)).item() - (y <= x)) ** 2
    pts = sorted({float(y)} | {float(v) for v in np.ravel(dist.kinks()) if np.isfinite(v)})
    opts = dict(limit=500, epsabs=1e-13, epsrel=1e-13)
    total = integrate.quad(f, -np.inf, pts[0], **opts)[0] + integrate.quad(f, pts[-1], np.inf, **opts)[0]
    for a, b in zip(pts[:-1], pts[1:]):
        total += integrate.quad(f, a, b, **opts)[0]
    return total


FORECASTS = [
    Normal(mu=0.3, sigma=1.7), Logistic(mu=-1, s=0.5), Uniform(a=-1, b=2), Exponential(rate=2),
    GPD(sigma=1, xi=0.25), GPD(sigma=1, xi=0.9), GPD(sigma=2, xi=-0.3), GPD(sigma=1, xi=0.0),
    Gamma(shape=0.5, scale=2), Gamma(shape=3, scale=1), GEV(mu=0, sigma=1, xi=0.3), GEV(mu=0, sigma=1, xi=-0.3),
    GEV(mu=1, sigma=2, xi=0.0), CensoredBelow(Logistic(mu=0.5, s=1), 0), CensoredBelow(Normal(mu=0, sigma=1), 0.2),
    Shifted(Exponential(rate=1), 0.4), Scaled(Logistic(mu=0, s=1), 2.5),
    Mixture([0.3, 0.7], [Normal(mu=0, sigma=1), GPD(sigma=1, xi=0.5)]),
    Piecewise(Shifted(GPD(sigma=0.8, xi=0.25), 1.0), GPD(sigma=1, xi=0.25), 5.0),
    Ensemble([0, 1, 1, 3.5]),
]
OBS = [-2.0, 0.0, 0.4, 3.0, 40.0]


# ---------------------------------------------------------------- examples

def test_crps_examples():
    assert crps(Ensemble([2.5]), 0.5) == pytest.approx(2.0)
    assert crps(Ensemble([2.5]), 7.0) == pytest.approx(4.5)
    assert crps(Uniform(a=0, b=1), 0.0) == pytest.approx(1 / 3, abs=1e-14)
    assert crps(Uniform(a=0, b=1), 0.0, method="quadrature") == pytest.approx(1 / 3, abs=1e-10)
    assert crps(Ensemble([0, 1]), 0.0) == pytest.approx(0.25, abs=1e-15)
    assert crps(Ensemble([0, 1]), 0.0, method="quadrature") == pytest.approx(0.25, abs=1e-6)


@pytest.mark.parametrize("dist", FORECASTS, ids=lambda d: d.to_spec())
def test_both_paths_match_scipy_quadrature(dist):
    for y in OBS:
        oracle = quad_crps(dist, y)
        assert crps(dist, y) == pytest.approx(oracle, abs=1e-8)
        assert crps(dist, y, method="quadrature") == pytest.approx(oracle, abs=1e-8)


def test_batched_and_broadcast_shapes():
    d = Normal(mu=np.array([[0.0], [1.0]]), sigma=np.array([1.0, 2.0, 3.0]))
    y = np.array([0.5, -1.0, 2.0])
    auto = crps(d, y)
    quad = crps(d, y, method="quadrature")
    assert auto.shape == quad.shape == (2, 3)
    np.testing.assert_allclose(auto, quad, atol=1e-10)
    for i in range(2):
        for j in range(3):
            assert auto[i, j] == pytest.approx(quad_crps(d[i, j], y[j]), abs=1e-8)


def test_stacked_and_batched_mixture():
    specs = ["normal(mu=0, sigma=1)", "ensemble(1, 2, 4)", "gev(mu=0, sigma=1, xi=0.2)", "normal(mu=1, sigma=2)"]
    stacked = parse_specs(specs)
    y = np.array([0.3, 2.0, 5.0, -1.0])
    expect = [quad_crps(parse_specs([s]), v) for s, v in zip(specs, y)]
    np.testing.assert_allclose(crps(stacked, y), expect, atol=1e-8)
    np.testing.assert_allclose(crps(stacked, y, method="quadrature"), expect, atol=1e-8)
    tau = np.array([1.0, -1.0, 1.0])
    mix = Mixture([0.5, 0.5], [Uniform(a=0, b=1), Uniform(a=-tau, b=1 - tau)])
    yy = np.array([0.2, 0.9, 0.5])
    np.testing.assert_allclose(crps(mix, yy), [quad_crps(mix[i], yy[i]) for i in range(3)], atol=1e-8)


def test_divergent_forecasts():
    for d in (GPD(sigma=1, xi=1.0), GEV(mu=0, sigma=1, xi=1.5), Mixture([0.5, 0.5], [Normal(mu=0, sigma=1), GPD(sigma=1, xi=2.0)])):
        with pytest.raises(DivergentScoreError):
            crps(d, 1.0)
    assert math.isfinite(crps(GPD(sigma=1, xi=0.99), 1.0))


def test_lower_square_integral_closed_form():
    d = Logistic(mu=np.array([-1.0, 0.5, 3.0]), s=np.array([0.5, 1.0, 2.0]))
    for c in (-2.0, 0.0, 1.5):
        oracle = [integrate.quad(lambda x: float(d[i].cdf(x)) ** 2, -np.inf, c, epsabs=1e-13)[0] for i in range(3)]
        np.testing.assert_allclose(lower_square_integral(d, c), oracle, atol=1e-10)
        np.testing.assert_allclose(lower_square_integral(Normal(mu=0, sigma=1), c),
                                   integrate.quad(lambda x: float(Normal(mu=0, sigma=1).cdf(x)) ** 2, -np.inf, c)[0],
                                   atol=1e-10)


def test_pair_mean_distance_closed_forms():
    # E|X - X'| = 2 sigma / ((1 - xi)(2 - xi)) for the GPD, 2 sigma / sqrt(pi) for the normal
    for sigma, xi in [(1.0, 0.25), (2.0, 0.5), (1.0, -0.2)]:
        assert pair_mean_distance(GPD(sigma=sigma, xi=xi), GPD(sigma=sigma, xi=xi)) == pytest.approx(
            2 * sigma / ((1 - xi) * (2 - xi)), rel=1e-9)
    assert pair_mean_distance(Normal(mu=0, sigma=3), Normal(mu=0, sigma=3)) == pytest.approx(6 / math.sqrt(math.pi), rel=1e-10)
    # independent normals: X - X' ~ N(mu1 - mu2, s1^2 + s2^2)
    s = math.hypot(1, 2)
    expected = s * math.sqrt(2 / math.pi) * math.exp(-0.5 / s**2) + 1 * (1 - 2 * Normal(mu=0, sigma=1).cdf(-1 / s))
    assert pair_mean_distance(Normal(mu=1, sigma=1), Normal(mu=0, sigma=2)) == pytest.approx(float(expected), rel=1e-9)


# -------------------------------------------------------------- properties

@settings(max_examples=80, deadline=None)
@given(members=st.lists(st.floats(-50, 50), min_size=1, max_size=12), y=st.floats(-60, 60))
def test_quadrature_matches_ensemble_closed_form(members, y):
    ens = Ensemble(members)
    assert crps(ens, y, method="quadrature") == pytest.approx(crps(ens, y), abs=1e-6)


@settings(max_examples=80, deadline=None)
@given(idx=st.integers(0, len(FORECASTS) - 1), y=st.floats(-100, 100))
def test_crps_nonnegative(idx, y):
    assert crps(FORECASTS[idx], y) >= 0
    assert crps(FORECASTS[idx], y, method="quadrature") >= 0


@given(y=st.floats(-1e6, 1e6))
def test_crps_zero_for_point_mass_at_observation(y):
    assert crps(Ensemble([y]), y) == 0.0
    assert crps(Ensemble([y, y, y]), y, method="quadrature") == 0.0


@settings(max_examples=40, deadline=None)
@given(members=st.lists(st.floats(-5, 5), min_size=2, max_size=8), y=st.floats(-6, 6), shift=st.floats(-3, 3))
def test_crps_shift_equivariance(members, y, shift):
    a = crps(Ensemble(members), y)
    b = crps(Ensemble(np.asarray(members) + shift), y + shift)
    assert b == pytest.approx(a, abs=1e-9)


# ---------------------------------------------------------- expected score

def test_expected_score_uniform_truth():
    est = expected_score(Uniform(a=0, b=1), Uniform(a=0, b=1), 20000, seed=1)
    assert abs(est.mean - 1 / 6) <= 3 * est.std_error
    # oracle: E int (x - 1{Y <= x})^2 dx = int x (1 - x) dx for Y ~ U(0, 1)
    assert integrate.quad(lambda x: x * (1 - x), 0, 1)[0] == pytest.approx(1 / 6)
    quarter = expected_score(Uniform(a=0, b=1), Uniform(a=0, b=1), 80000, seed=2)
    assert est.std_error / quarter.std_error == pytest.approx(2.0, rel=0.2)
    assert est.std_error >= 0 and est.n == 20000


def test_truth_has_minimal_expected_score():
    truth = GPD(sigma=1, xi=0.25)
    own = expected_score(truth, truth, 20000, seed=3)
    for other in (GPD(sigma=1.3, xi=0.25), GPD(sigma=1, xi=0.0), Exponential(rate=0.8), Normal(mu=1.3, sigma=1.5)):
        alt = expected_score(other, truth, 20000, seed=3)  # same draws
        assert own.mean <= alt.mean + 3 * math.hypot(own.std_error, alt.std_error)


def _random_family(rng):
    k = rng.integers(5)
    if k == 0:
        return Normal(mu=rng.normal(), sigma=rng.uniform(0.3, 3))
    if k == 1:
        return Logistic(mu=rng.normal(), s=rng.uniform(0.3, 2))
    if k == 2:
        return GPD(sigma=rng.uniform(0.3, 3), xi=rng.uniform(-0.4, 0.6))
    if k == 3:
        return Gamma(shape=rng.uniform(0.5, 5), scale=rng.uniform(0.3, 2))
    a = rng.normal()
    return Uniform(a=a, b=a + rng.uniform(0.5, 4))


def test_propriety_spot_check():
    rng = np.random.default_rng(zlib.crc32(b"propriety"))
    for k in range(50):
        f, g = _random_family(rng), _random_family(rng)
        y = g.sample(np.random.default_rng(k), 4000)
        diff = crps(f, y) - crps(g, y)
        assert diff.mean() >= -3 * diff.std(ddof=1) / math.sqrt(y.size)


def test_insensitivity_gap_matches_exact_divergence():
    g, h = GPD(sigma=1, xi=0.25), GPD(sigma=1, xi=0.5)
    rows = mixture_insensitivity_check(g, h, [0.0, 0.5, 0.1, 0.01], 100000, seed=4)
    assert rows[0].gap == 0.0 and rows[0].score_mixture == rows[0].score_truth
    # oracle: S(F_lam, G) - S(G, G) = lam^2 int (H - G)^2 dx
    d2 = integrate.quad(lambda x: float(h.cdf(x) - g.cdf(x)) ** 2, 0, np.inf, limit=200)[0]
    for row in rows[1:]:
        assert abs(row.gap - row.lam**2 * d2) <= 3 * row.gap_se + 1e-12
        assert row.holds()
        assert row.bound_se >= 0
        # the bound divergence is the same int (H - G)^2, scaled by lam / (1 - lam)
        assert row.bound == pytest.approx(row.lam / (1 - row.lam) * d2, abs=3 * row.bound_se)
    assert [r.gap for r in rows[1:]] == sorted([r.gap for r in rows[1:]], reverse=True)
    assert json.dumps(rows[1].to_dict())


# -------------------------------------------------------------- optimizer

def test_nelder_mead_rosenbrock_and_budget():
    rosen = lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
    res = nelder_mead(rosen, [-1.2, 1.0], 5000)
    assert res.converged and np.allclose(res.x, [1, 1], atol=1e-4)
    zero = nelder_mead(rosen, [-1.2, 1.0], 0)
    assert not zero.converged and zero.n_evaluations == 0 and list(zero.x) == [-1.2, 1.0]
    short = nelder_mead(rosen, [-1.2, 1.0], 20)
    assert not short.converged and short.n_evaluations <= 20 + 3
    assert short.fun <= rosen([-1.2, 1.0])


# -------------------------------------------------------------------- EMOS

def emos_data(n=2000, seed=0):
    pairs = generate(ScenarioSpec("ensemble-emos", n, seed))["raw_ensemble"]
    return pairs.covariates["ens_mean"], pairs.covariates["ens_sd"], pairs.y


def test_emos_recovers_true_coefficients():
    model = emos_fit(*emos_data())
    assert model.converged
    np.testing.assert_allclose(model.coefficients, (0, 1, 1, 0), atol=0.1)
    assert model.n_train == 2000 and model.mean_crps > 0


def test_emos_permutation_invariant():
    m, s, y = emos_data(500, 3)
    a = emos_fit(m, s, y)
    p = np.random.default_rng(0).permutation(500)
    b = emos_fit(m[p], s[p], y[p])
    assert a.coefficients == b.coefficients and a.n_evaluations == b.n_evaluations


def test_emos_budget_zero_returns_init():
    m, s, y = emos_data(200, 1)
    init = (0.1, 0.9, 1.1, 0.2)
    model = emos_fit(m, s, y, init=init, budget=0)
    assert model.coefficients == init and not model.converged and model.n_evaluations == 0


def test_emos_errors():
    m, s, y = emos_data(50, 2)
    with pytest.raises(DegeneratePredictorError):
        emos_fit(m, np.zeros_like(s), y)
    with pytest.raises(InsufficientDataError):
        emos_fit(m[:9], s[:9], y[:9])
    with pytest.raises(InitializationError):
        emos_fit(m, s, y, init=(0, 1, -1, 0))
    with pytest.raises(InitializationError):
        emos_fit(m, s, y, family="censored_gev", init=(0, 1, 1, 0, 1.5))  # infinite-mean start


def test_emos_gev_and_json_round_trip(tmp_path):
    m, s, y = emos_data(300, 5)
    model = emos_fit(m, s, y, family="censored_gev", budget=150)
    assert model.gev_shape is not None and model.n_evaluations <= 150 + 6
    path = tmp_path / "model.json"
    path.write_text(model.to_json())
    back = EmosModel.from_json(path.read_text())
    assert back == model
    pred = back.predict(m[:3], s[:3])
    assert pred.batch_shape == (3,)
    np.testing.assert_allclose(pred.base.mu, model.a + model.b * m[:3])
    np.testing.assert_allclose(pred.base.sigma, model.c * (1 + s[:3]) ** model.d)


def test_ensemble_statistics():
    mean, sd = ensemble_statistics([[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]])
    np.testing.assert_allclose(mean, [2.0, 4.0])
    np.testing.assert_allclose(sd, [math.sqrt(2 / 3), 0.0])
