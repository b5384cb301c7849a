"""Forecast distributions with exact cdf, left-limit, quantile and sampling semantics."""

from .base import Distribution, Parametric, fmt_number
from .families import GEV, GPD, Ensemble, Exponential, Gamma, Logistic, Normal, Uniform
from .grammar import FAMILIES, format_spec, parse_spec, parse_specs
from .wrappers import CensoredBelow, ExcessDistribution, Mixture, Piecewise, Scaled, Shifted, Stacked


def excess_distribution(dist: Distribution, t) -> ExcessDistribution:
    """Conditional excess law ``F_t(x) = (F(t + x) - F(t)) / (1 - F(t))``."""
    return ExcessDistribution(dist, t)


__all__ = [
    "Distribution", "Parametric", "fmt_number",
    "Normal", "Uniform", "Exponential", "Gamma", "Logistic", "GPD", "GEV", "Ensemble",
    "Shifted", "Scaled", "CensoredBelow", "Mixture", "Piecewise", "ExcessDistribution", "Stacked",
    "FAMILIES", "parse_spec", "parse_specs", "format_spec", "excess_distribution",
]
