"""Recipes regenerating the data (CSV) and panels (SVG) of each figure.

Every recipe takes the sample size ``n``, a seed and an output directory
and returns the written file names relative to that directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from ..diagnostics import BinPartition, binned_sup_distance_series
from ..scoring import emos_fit
from ..simlab import ScenarioSpec, generate
from .io import write_table
from .pipeline import RunConfig, run_diagnose
from .svg import render_table

# five thresholds as empirical quantile levels of the observations
FIVE_LEVELS = (0.5, 0.9, 0.95, 0.99, 0.995)
TAIL_LEVELS = (0.97, 0.99, 0.995)
SWEEP_LEVELS = np.linspace(0.5, 0.995, 34)


@dataclass(frozen=True)
class Figure:
    description: str
    default_n: int
    build: Callable[[int, int, Path], list[str]]


def _panels(pairs_by_name, config: RunConfig, out: Path, one_dir: bool = False) -> list[str]:
    files = []
    for name, pairs in pairs_by_name.items():
        sub = out if one_dir else out / name
        result = run_diagnose(pairs, config, sub, title=name)
        files += [str((sub / f).relative_to(out)) for f in result.files]
    return files


def unfocused_density(n: int, seed: int, out: Path) -> list[str]:
    """Densities of the two-component unfocused forecast at mean 0."""
    x = np.linspace(-4.0, 5.0, 361)
    curves = {
        "outcome N(0, 1)": stats.norm.pdf(x),
        "forecast, tau = +1": 0.5 * stats.norm.pdf(x) + 0.5 * stats.norm.pdf(x, loc=1.0),
        "forecast, tau = -1": 0.5 * stats.norm.pdf(x) + 0.5 * stats.norm.pdf(x, loc=-1.0),
    }
    cols = {"curve": [], "x": [], "density": []}
    for name, d in curves.items():
        cols["curve"] += [name] * x.size
        cols["x"] += x.tolist()
        cols["density"] += d.tolist()
    write_table(out / "density.csv", cols, ["mu = 0; the forecaster issues each dashed density with probability 1/2"])
    render_table(out / "density.csv", out / "density.svg", x="x", y="density", group="curve",
                 title="unfocused forecaster", xlabel="y", ylabel="density")
    return ["density.csv", "density.svg"]


def _scenario(name: str, n: int, seed: int, **params):
    return generate(ScenarioSpec(name, n, seed, params))


def nonrandom_panels(n: int, seed: int, out: Path) -> list[str]:
    pairs = _scenario("nonrandom", n, seed)
    return _panels(pairs, RunConfig(quantile_levels=FIVE_LEVELS, standard=True, seed=seed), out, one_dir=True)


def uniform_unfocused_panels(n: int, seed: int, out: Path) -> list[str]:
    pairs = _scenario("uniform-unfocused", n, seed)
    return _panels(pairs, RunConfig(quantile_levels=FIVE_LEVELS, standard=True, seed=seed), out, one_dir=True)


def trio_panels(n: int, seed: int, out: Path) -> list[str]:
    pairs = _scenario("exponential-trio", n, seed, gamma=0.25, nu=1.4)
    return _panels(pairs, RunConfig(quantile_levels=FIVE_LEVELS, seed=seed), out)


def _binned_sweep(pairs_by_name, covariate: str, out: Path, n_bins: int = 3) -> list[str]:
    cols = {"forecaster": [], "bin": [], "level": [], "threshold": [], "value": [], "n_exceedances": []}
    first = next(iter(pairs_by_name.values()))
    partition = BinPartition.from_quantiles(first.covariates[covariate], n_bins, covariate)
    grid = np.quantile(first.y, SWEEP_LEVELS)
    for name, pairs in pairs_by_name.items():
        for j, series in enumerate(binned_sup_distance_series(pairs, partition, grid)):
            cols["forecaster"] += [name] * grid.size
            cols["bin"] += [j + 1] * grid.size
            cols["level"] += SWEEP_LEVELS.tolist()
            cols["threshold"] += grid.tolist()
            cols["value"] += series.values.tolist()
            cols["n_exceedances"] += series.n_exceedances.tolist()
    edges = ", ".join(repr(float(e)) for e in partition.edges)
    write_table(out / "binned_sup_distance.csv", cols,
                [f"{n_bins} quantile bins of {covariate}, edges [{edges}]"])
    files = ["binned_sup_distance.csv"]
    for j in range(n_bins):
        keep = [i for i, b in enumerate(cols["bin"]) if b == j + 1]
        sub = {k: [v[i] for i in keep] for k, v in cols.items()}
        write_table(out / f"bin{j + 1}.csv", sub, [f"bin {j + 1} of {n_bins} on {covariate}"])
        render_table(out / f"bin{j + 1}.csv", out / f"bin{j + 1}.svg", x="level", y="value",
                     group="forecaster", ylim=(0, None), title=f"bin {j + 1} of {covariate}", xlabel="threshold quantile level",
                     ylabel="max |R(u) - u|")
        files += [f"bin{j + 1}.csv", f"bin{j + 1}.svg"]
    return files


def trio_binned(n: int, seed: int, out: Path) -> list[str]:
    pairs = _scenario("exponential-trio", n, seed, gamma=0.25, nu=1.4)
    return _binned_sweep(pairs, "delta", out)


def optimistic_panels(n: int, seed: int, out: Path) -> list[str]:
    pairs = _scenario("optimistic", n, seed, gamma=0.25)
    files = _panels(pairs, RunConfig(quantile_levels=FIVE_LEVELS, seed=seed), out, one_dir=True)
    return files + _binned_sweep(pairs, "delta", out)


def normal_quartet_panels(n: int, seed: int, out: Path) -> list[str]:
    pairs = _scenario("normal-quartet", n, seed)
    return _panels(pairs, RunConfig(quantile_levels=FIVE_LEVELS, standard=True, seed=seed), out)


EMOS_TRAIN_CAP = 20_000


def emos_panels(n: int, seed: int, out: Path) -> list[str]:
    """Raw ensemble versus CRPS-fitted EMOS on held-out synthetic data.

    A synthetic stand-in for an ensemble post-processing case study: the
    first half of the pairs (at most ``EMOS_TRAIN_CAP``) trains the model,
    the second half is diagnosed with 95% delta-method bands.
    """
    pairs = _scenario("ensemble-emos", n, seed)
    raw = pairs["raw_ensemble"]
    half = raw.n // 2
    n_train = min(half, EMOS_TRAIN_CAP)
    m, s = raw.covariates["ens_mean"], raw.covariates["ens_sd"]
    model = emos_fit(m[:n_train], s[:n_train], raw.y[:n_train])
    (out / "emos_model.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "emos_model.json").write_text(model.to_json() + "\n", encoding="utf-8")
    test = raw[half:]
    streams = {"raw_ensemble": test, "emos": test.with_forecast(model.predict(m[half:], s[half:]))}
    config = RunConfig(quantile_levels=TAIL_LEVELS, standard=True, ci_level=0.95, tests=("ks", "binomial"),
                       seed=seed)
    return ["emos_model.json"] + _panels(streams, config, out)


FIGURES: dict[str, Figure] = {
    "unfocused-density": Figure("densities issued by the unfocused normal forecaster", 0, unfocused_density),
    "nonrandom-panels": Figure("combined, severity and occurrence panels for the spliced GPD forecast",
                               10**6, nonrandom_panels),
    "uniform-unfocused-panels": Figure("three panels for the unfocused uniform forecaster", 10**6,
                                       uniform_unfocused_panels),
    "trio-panels": Figure("ideal, climatological and extremist exponential forecasters at five thresholds",
                          10**6, trio_panels),
    "trio-binned": Figure("per-bin sup distance versus threshold, three bins of delta", 10**6, trio_binned),
    "optimistic-panels": Figure("combined ratio and per-bin sup distances for the optimistic forecaster",
                                10**6, optimistic_panels),
    "normal-quartet-panels": Figure("ideal, climatological, unfocused and sign-reversed normal forecasters",
                                    10**6, normal_quartet_panels),
    "emos-panels": Figure("raw ensemble versus fitted EMOS with confidence bands (synthetic data)", 10**5,
                          emos_panels),
}


def run_figure(figure_id: str, n: int | None, seed: int, out_dir) -> list[str]:
    fig = FIGURES[figure_id]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = fig.default_n if n is None else int(n)
    return fig.build(max(n, 1), seed, out)
