"""Seeded generators for the synthetic forecasters used to exercise the
tail-calibration diagnostics.

Every generator draws in chunks of ``CHUNK`` pairs; chunk ``k`` uses the
stream ``numpy.random.default_rng([seed, k])`` and fixed columns of
uniforms, which are pushed through quantile functions.  Output is therefore
a pure function of ``(name, n, seed, params)``.

The gamma mixing variable ``Delta`` has shape ``1/gamma`` and scale
``gamma`` (mean 1), so that ``Y | Delta ~ Exp(Delta)`` is marginally
``GPD(1, gamma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import ForecastPairs
from .dists import GPD, CensoredBelow, Ensemble, Exponential, Gamma, Logistic, Mixture, Normal, Piecewise, Shifted, Uniform
from .errors import ParameterError

CHUNK = 2**16


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n: int
    seed: int
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ParameterError(f"unknown scenario {self.name!r}; choose from {sorted(SCENARIOS)}")
        if int(self.n) < 1:
            raise ParameterError("n must be at least 1")
        unknown = set(self.params) - set(SCENARIOS[self.name].defaults)
        if unknown:
            raise ParameterError(f"{self.name}: unknown parameters {sorted(unknown)}")

    def resolved_params(self) -> dict[str, float]:
        out = dict(SCENARIOS[self.name].defaults)
        out.update({k: float(v) for k, v in self.params.items()})
        return out


def _uniforms(n: int, seed: int, k: int) -> np.ndarray:
    """``(n, k)`` uniforms in (0, 1), drawn chunk by chunk."""
    parts = []
    for c, start in enumerate(range(0, n, CHUNK)):
        size = min(CHUNK, n - start)
        parts.append(np.random.default_rng([seed, c]).random((size, k)))
    u = np.concatenate(parts, axis=0)
    return np.where(u > 0, u, 2.0**-54)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise ParameterError(f"{name} must be positive and finite, got {value}")
    return value


def _mixing(gamma: float, u: np.ndarray) -> np.ndarray:
    return Gamma(shape=1 / gamma, scale=gamma).quantile(u)


def _exp(rate: np.ndarray, u: np.ndarray) -> np.ndarray:
    return -np.log1p(-u) / rate


def gen_exponential_trio(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """Ideal ``Exp(Delta)``, climatological ``GPD(1, gamma)`` and extremist
    ``Exp(Delta / nu)`` forecasts for one shared draw of ``(Delta, Y)``."""
    p = spec.resolved_params()
    gamma, nu = _positive("gamma", p["gamma"]), _positive("nu", p["nu"])
    u = _uniforms(spec.n, spec.seed, 2)
    delta = _mixing(gamma, u[:, 0])
    y = _exp(delta, u[:, 1])
    cov = {"delta": delta}
    return {
        "ideal": ForecastPairs(Exponential(rate=delta), y, cov),
        "climatological": ForecastPairs(GPD(sigma=1.0, xi=gamma), y, cov),
        "extremist": ForecastPairs(Exponential(rate=delta / nu), y, cov),
    }


def gen_misinformed(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """``Y ~ Exp(Delta1)`` forecast by ``Exp(Delta2)`` with independent mixing."""
    gamma = _positive("gamma", spec.resolved_params()["gamma"])
    u = _uniforms(spec.n, spec.seed, 3)
    d1, d2 = _mixing(gamma, u[:, 0]), _mixing(gamma, u[:, 1])
    y = _exp(d1, u[:, 2])
    return {"misinformed": ForecastPairs(Exponential(rate=d2), y, {"delta1": d1, "delta2": d2})}


def gen_tail_unfocused(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """``Y ~ Exp(1)`` forecast by the law of ``Y + log((2 + tau) / 2)``, ``tau = +-1``."""
    u = _uniforms(spec.n, spec.seed, 2)
    y = _exp(1.0, u[:, 0])
    tau = np.where(u[:, 1] < 0.5, 1.0, -1.0)
    shift = np.log((2 + tau) / 2)
    return {"tail_unfocused": ForecastPairs(Shifted(Exponential(rate=1.0), shift), y, {"tau": tau})}


def gen_uniform_unfocused(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """``Y ~ U(0, 1)`` forecast by ``(G(y) + G(y + tau)) / 2`` with ``G`` uniform.

    The equal mixture of ``U(0, 1)`` and ``U(-tau, 1 - tau)`` is written out
    as a mixture, i.e. ``U(-1, 1)`` for ``tau = 1`` and ``U(0, 2)`` for
    ``tau = -1``.
    """
    u = _uniforms(spec.n, spec.seed, 2)
    y = u[:, 0]
    tau = np.where(u[:, 1] < 0.5, 1.0, -1.0)
    forecast = Mixture([0.5, 0.5], [Uniform(a=0.0, b=1.0), Uniform(a=-tau, b=1.0 - tau)])
    return {"uniform_unfocused": ForecastPairs(forecast, y, {"tau": tau})}


NONRANDOM_FORECAST = Piecewise(Shifted(GPD(sigma=0.8, xi=0.25), 1.0), GPD(sigma=1.0, xi=0.25), 5.0)


def gen_nonrandom_tailmatch(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """``Y ~ GPD(1, 1/4)`` with the deterministic forecast that follows
    ``GPD(4/5, 1/4)(x - 1)`` below 5 and ``GPD(1, 1/4)`` from 5 on."""
    u = _uniforms(spec.n, spec.seed, 1)
    y = GPD(sigma=1.0, xi=0.25).quantile(u[:, 0])
    return {"nonrandom": ForecastPairs(NONRANDOM_FORECAST, y)}


def gen_optimistic(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """``Y`` = middle value of ``(X, 2X, L)`` with ``X | Delta ~ Exp(Delta)``
    and ``L ~ GPD(1, gamma/2)``; the forecast is ``Exp(Delta)``."""
    gamma = _positive("gamma", spec.resolved_params()["gamma"])
    u = _uniforms(spec.n, spec.seed, 3)
    delta = _mixing(gamma, u[:, 0])
    x = _exp(delta, u[:, 1])
    lv = GPD(sigma=1.0, xi=gamma / 2).quantile(u[:, 2])
    y = np.median(np.stack([x, 2 * x, lv]), axis=0)
    return {"optimistic": ForecastPairs(Exponential(rate=delta), y, {"delta": delta})}


def gen_normal_quartet(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """Ideal, climatological, unfocused and sign-reversed normal forecasters."""
    u = _uniforms(spec.n, spec.seed, 3)
    std = Normal(mu=0.0, sigma=1.0)
    mu = std.quantile(u[:, 0])
    y = mu + std.quantile(u[:, 1])
    tau = np.where(u[:, 2] < 0.5, 1.0, -1.0)
    cov = {"mu": mu, "tau": tau}
    return {
        "ideal": ForecastPairs(Normal(mu=mu, sigma=1.0), y, cov),
        "climatological": ForecastPairs(Normal(mu=0.0, sigma=math.sqrt(2.0)), y, cov),
        "unfocused": ForecastPairs(
            Mixture([0.5, 0.5], [Normal(mu=mu, sigma=1.0), Normal(mu=mu + tau, sigma=1.0)]), y, cov
        ),
        "sign_reversed": ForecastPairs(Normal(mu=-mu, sigma=1.0), y, cov),
    }


def gen_gpd_pair(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """``Y ~ GPD(1, xi)`` with the deterministic forecast ``GPD(sigma_f, eta)``."""
    p = spec.resolved_params()
    sigma_f = _positive("sigma_f", p["sigma_f"])
    u = _uniforms(spec.n, spec.seed, 1)
    y = GPD(sigma=1.0, xi=p["xi"]).quantile(u[:, 0])
    return {"gpd_pair": ForecastPairs(GPD(sigma=sigma_f, xi=p["eta"]), y)}


EMOS_MEMBERS = 10


def gen_ensemble_emos(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """Raw ensembles and a censored-logistic truth driven by their mean.

    Ensemble ``i`` has ``EMOS_MEMBERS`` members ``c_i + r_i Z_ij`` with centre
    ``c_i ~ U(lo, hi)`` and spread ``r_i ~ U(0, spread)``; the observation is
    ``max(0, m_i + L_i)`` with ``m_i`` the ensemble mean and ``L_i`` standard
    logistic, so the true EMOS coefficients are ``(a, b, c, d) = (0, 1, 1, 0)``.
    Two forecasters share the draws: the raw ensemble and the true law.
    """
    p = spec.resolved_params()
    if not p["hi"] > p["lo"]:
        raise ParameterError("need hi > lo")
    spread = _positive("spread", p["spread"])
    u = _uniforms(spec.n, spec.seed, 3 + EMOS_MEMBERS)
    centre = p["lo"] + (p["hi"] - p["lo"]) * u[:, 0]
    radius = spread * u[:, 1]
    members = centre[:, None] + radius[:, None] * Normal(mu=0.0, sigma=1.0).quantile(u[:, 3:])
    m, s = members.mean(axis=1), members.std(axis=1)
    y = np.maximum(0.0, m + Logistic(mu=0.0, s=1.0).quantile(u[:, 2]))
    cov = {"ens_mean": m, "ens_sd": s}
    return {
        "raw_ensemble": ForecastPairs(Ensemble(members), y, cov),
        "true_emos": ForecastPairs(CensoredBelow(Logistic(mu=m, s=1.0), 0.0), y, cov),
    }


def _optimistic_marginal(p: dict[str, float]) -> Callable[[np.ndarray], np.ndarray]:
    # Y <= y  iff  2X <= y,  or  X <= y < 2X and L <= y
    g, h = GPD(sigma=1.0, xi=p["gamma"]), GPD(sigma=1.0, xi=p["gamma"] / 2)
    return lambda y: g.cdf(np.asarray(y) / 2) + (g.cdf(y) - g.cdf(np.asarray(y) / 2)) * h.cdf(y)


@dataclass(frozen=True)
class Scenario:
    generate: Callable[[ScenarioSpec], dict[str, ForecastPairs]]
    defaults: dict[str, float]
    marginal: Callable[[dict[str, float]], Callable[[np.ndarray], np.ndarray]] | None
    marginal_text: Callable[[dict[str, float]], str]


SCENARIOS: dict[str, Scenario] = {
    "exponential-trio": Scenario(
        gen_exponential_trio, {"gamma": 0.25, "nu": 1.4},
        lambda p: GPD(sigma=1.0, xi=p["gamma"]).cdf, lambda p: GPD(sigma=1.0, xi=p["gamma"]).to_spec(),
    ),
    "misinformed": Scenario(
        gen_misinformed, {"gamma": 0.25},
        lambda p: GPD(sigma=1.0, xi=p["gamma"]).cdf, lambda p: GPD(sigma=1.0, xi=p["gamma"]).to_spec(),
    ),
    "tail-unfocused": Scenario(
        gen_tail_unfocused, {}, lambda p: Exponential(rate=1.0).cdf, lambda p: "exponential(rate=1)",
    ),
    "uniform-unfocused": Scenario(
        gen_uniform_unfocused, {}, lambda p: Uniform(a=0.0, b=1.0).cdf, lambda p: "uniform(a=0, b=1)",
    ),
    "nonrandom": Scenario(
        gen_nonrandom_tailmatch, {}, lambda p: GPD(sigma=1.0, xi=0.25).cdf, lambda p: "gpd(sigma=1, xi=0.25)",
    ),
    "optimistic": Scenario(
        gen_optimistic, {"gamma": 0.25}, _optimistic_marginal,
        lambda p: f"cdf(y) = G(y/2) + (G(y) - G(y/2)) H(y), G = gpd(sigma=1, xi={p['gamma']!r}), "
                  f"H = gpd(sigma=1, xi={p['gamma'] / 2!r})",
    ),
    "normal-quartet": Scenario(
        gen_normal_quartet, {}, lambda p: Normal(mu=0.0, sigma=math.sqrt(2.0)).cdf,
        lambda p: Normal(mu=0.0, sigma=math.sqrt(2.0)).to_spec(),
    ),
    "gpd-pair": Scenario(
        gen_gpd_pair, {"xi": 0.25, "eta": 0.25, "sigma_f": 1.0},
        lambda p: GPD(sigma=1.0, xi=p["xi"]).cdf, lambda p: GPD(sigma=1.0, xi=p["xi"]).to_spec(),
    ),
    "ensemble-emos": Scenario(
        gen_ensemble_emos, {"lo": 0.0, "hi": 10.0, "spread": 6.0}, None,
        lambda p: "no closed form: max(0, m + logistic(mu=0, s=1)), m the mean of "
                  f"{EMOS_MEMBERS} members centred at uniform(a={p['lo']!r}, b={p['hi']!r})",
    ),
}


def generate(spec: ScenarioSpec) -> dict[str, ForecastPairs]:
    """Run the generator named by ``spec``; keys name the forecasters."""
    return SCENARIOS[spec.name].generate(spec)


def marginal_cdf(spec: ScenarioSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Analytic cdf of the observations produced by ``spec``, or None."""
    marginal = SCENARIOS[spec.name].marginal
    return None if marginal is None else marginal(spec.resolved_params())


def marginal_description(spec: ScenarioSpec) -> str:
    return SCENARIOS[spec.name].marginal_text(spec.resolved_params())
