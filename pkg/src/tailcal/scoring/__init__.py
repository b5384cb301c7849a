"""Proper scoring: CRPS, Monte-Carlo expected scores and CRPS-fitted EMOS."""

from .crps import check_finite_mean, crps, lower_square_integral, pair_mean_distance
from .emos import EMOS_FAMILIES, EmosModel, emos_fit, ensemble_statistics
from .expected import InsensitivityRow, ScoreEstimate, expected_score, mixture_insensitivity_check
from .optimize import OptimizeResult, nelder_mead

__all__ = [
    "crps", "check_finite_mean", "lower_square_integral", "pair_mean_distance",
    "ScoreEstimate", "expected_score", "InsensitivityRow", "mixture_insensitivity_check",
    "OptimizeResult", "nelder_mead",
    "EMOS_FAMILIES", "EmosModel", "emos_fit", "ensemble_statistics",
]
