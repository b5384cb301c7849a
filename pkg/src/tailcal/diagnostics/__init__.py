"""Empirical tail-calibration diagnostics for forecast-observation pairs."""

from .curves import (
    DEFAULT_U_GRID, DENOMINATOR_CUTOFF, BinPartition, DiagnosticCurve, MarginalTailCurve, RatioSeries,
    binned_combined_ratio, binned_sup_distance_series, check_u_grid, combined_ratio_curve,
    marginal_tail_curve, occurrence_ratio, occurrence_ratio_series, severity_pp_curve, sup_distance,
    sup_distance_series, thresholds_from_quantiles,
)
from .pairs import (
    ForecastObservationPair, ForecastPairs, TailSample, effective_thresholds, excess_pit, pit, tail_sample,
)

__all__ = [
    "ForecastObservationPair", "ForecastPairs", "TailSample", "effective_thresholds", "excess_pit", "pit",
    "tail_sample", "DEFAULT_U_GRID", "DENOMINATOR_CUTOFF", "BinPartition", "DiagnosticCurve",
    "MarginalTailCurve", "RatioSeries", "binned_combined_ratio", "binned_sup_distance_series",
    "check_u_grid", "combined_ratio_curve", "marginal_tail_curve", "occurrence_ratio",
    "occurrence_ratio_series", "severity_pp_curve", "sup_distance", "sup_distance_series",
    "thresholds_from_quantiles",
]
