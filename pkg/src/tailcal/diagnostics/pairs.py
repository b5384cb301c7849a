"""Forecast-observation pairs and (excess) probability integral transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from ..dists import Distribution, parse_specs
from ..errors import DomainError, MissingRandomizerError


@dataclass(frozen=True)
class ForecastObservationPair:
    """One realization ``(F_i, y_i)`` with optional covariates and threshold."""

    forecast: Distribution
    observation: float
    covariates: Mapping[str, float] = field(default_factory=dict)
    threshold: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.observation):
            raise DomainError("observation must be finite")
        if self.threshold is not None and not math.isfinite(self.threshold):
            raise DomainError("threshold override must be finite")
        if self.forecast.batch_shape != ():
            raise DomainError("a single pair needs an unbatched forecast")


class ForecastPairs:
    """A sample of ``n`` forecast-observation pairs stored column-wise.

    Parameters
    ----------
    forecast : Distribution
        Batched forecast with batch shape ``(n,)``; an unbatched forecast is
        used for every pair.
    y : array_like, shape (n,)
        Observations.
    covariates : mapping of name to array, optional
        Covariates used for binning.
    thresholds : array_like, optional
        Per-pair threshold overrides; NaN marks "no override".
    randomizer : array_like, optional
        Independent uniforms used by randomized PITs of atomic forecasts.
    """

    def __init__(
        self,
        forecast: Distribution,
        y: Any,
        covariates: Mapping[str, Any] | None = None,
        thresholds: Any = None,
        randomizer: Any = None,
    ) -> None:
        y = np.asarray(y, dtype=float)
        if y.ndim != 1:
            raise DomainError("observations must be one-dimensional")
        if not np.all(np.isfinite(y)):
            raise DomainError("observations must be finite")
        n = y.shape[0]
        if forecast.batch_shape == ():
            forecast = forecast.broadcast_to((n,))
        elif forecast.batch_shape != (n,):
            raise DomainError(f"forecast batch shape {forecast.batch_shape} does not match {n} observations")
        self.forecast = forecast
        self.y = y
        self.covariates = {k: np.asarray(v, dtype=float) for k, v in (covariates or {}).items()}
        for k, v in self.covariates.items():
            if v.shape != (n,):
                raise DomainError(f"covariate {k!r} must have shape ({n},)")
        if thresholds is not None:
            thresholds = np.asarray(thresholds, dtype=float)
            if thresholds.shape != (n,) or np.any(np.isinf(thresholds)):
                raise DomainError("threshold overrides must be finite (NaN for none), one per pair")
            if np.all(np.isnan(thresholds)):
                thresholds = None
        self.thresholds = thresholds
        if randomizer is not None:
            randomizer = np.asarray(randomizer, dtype=float)
            if randomizer.shape != (n,) or np.any((randomizer < 0) | (randomizer > 1)):
                raise DomainError("randomizer must hold one value in [0, 1] per pair")
        self.randomizer = randomizer

    @classmethod
    def from_pairs(cls, pairs: Sequence[ForecastObservationPair], randomizer: Any = None) -> ForecastPairs:
        if not pairs:
            raise DomainError("no pairs given")
        forecast = parse_specs([p.forecast.to_spec() for p in pairs])
        names = sorted({k for p in pairs for k in p.covariates})
        cov = {k: [p.covariates.get(k, np.nan) for p in pairs] for k in names}
        thr = [np.nan if p.threshold is None else p.threshold for p in pairs]
        return cls(forecast, [p.observation for p in pairs], cov, thr, randomizer)

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def __getitem__(self, index: Any) -> ForecastPairs:
        index = np.arange(self.n)[index]
        if np.ndim(index) == 0:
            index = index[None]
        return ForecastPairs(
            self.forecast[index],
            self.y[index],
            {k: v[index] for k, v in self.covariates.items()},
            None if self.thresholds is None else self.thresholds[index],
            None if self.randomizer is None else self.randomizer[index],
        )

    def pair(self, i: int) -> ForecastObservationPair:
        thr = None if self.thresholds is None or np.isnan(self.thresholds[i]) else float(self.thresholds[i])
        return ForecastObservationPair(
            self.forecast[i], float(self.y[i]), {k: float(v[i]) for k, v in self.covariates.items()}, thr
        )

    def with_randomizer(self, rng: np.random.Generator) -> ForecastPairs:
        """Copy with fresh independent uniforms for randomized PITs."""
        return ForecastPairs(self.forecast, self.y, self.covariates, self.thresholds, rng.random(self.n))

    def with_forecast(self, forecast: Distribution) -> ForecastPairs:
        return ForecastPairs(forecast, self.y, self.covariates, self.thresholds, self.randomizer)

    def __repr__(self) -> str:
        return f"ForecastPairs(n={self.n}, forecast={self.forecast!r})"


@dataclass(frozen=True)
class TailSample:
    """Per-pair quantities entering every tail diagnostic at one threshold.

    ``z`` holds excess PITs for exceedances and NaN elsewhere;
    ``tail_prob`` is ``1 - F_i(t_i)``.
    """

    t: np.ndarray
    exceed: np.ndarray
    z: np.ndarray
    tail_prob: np.ndarray

    @property
    def n(self) -> int:
        return self.exceed.shape[0]

    @property
    def n_exceed(self) -> int:
        return int(np.count_nonzero(self.exceed))

    @property
    def denominator(self) -> float:
        return math.fsum(self.tail_prob)

    def sorted_pits(self) -> np.ndarray:
        return np.sort(self.z[self.exceed])


def effective_thresholds(pairs: ForecastPairs, t: float | None) -> np.ndarray:
    """Per-pair thresholds: the override where present, ``t`` elsewhere."""
    if t is None:
        if pairs.thresholds is None or np.any(np.isnan(pairs.thresholds)):
            raise DomainError("no threshold given and not every pair carries its own")
        return pairs.thresholds
    t = float(t)
    if math.isnan(t) or t == math.inf:
        raise DomainError("threshold must be finite or -inf")
    if pairs.thresholds is None:
        return np.full(pairs.n, t)
    return np.where(np.isnan(pairs.thresholds), t, pairs.thresholds)


def _randomized_cdf(forecast: Distribution, y: np.ndarray, v: np.ndarray | None, upper: bool) -> np.ndarray:
    """``(1 - v) F(y-) + v F(y)``, or its survival form ``(1 - v) S(y-) + v S(y)``."""
    right = forecast.sf(y) if upper else forecast.cdf(y)
    if forecast.continuous:
        return right
    left = forecast.sf_left(y) if upper else forecast.cdf_left(y)
    if np.array_equal(left, right):
        return right  # no observation sits on an atom
    if v is None:
        raise MissingRandomizerError("an observation sits on a forecast atom; supply a uniform randomizer")
    return (1.0 - v) * left + v * right


def tail_sample(pairs: ForecastPairs, t: float | None) -> TailSample:
    """Exceedance indicators, excess PITs and forecast exceedance probabilities.

    The excess PIT is ``F_t(y - t)``, randomized between its left and right
    limits for atomic forecasts.  It is evaluated as
    ``(F(y) - F(t)) / S(t)`` when ``F(t) <= 1/2`` and as ``1 - S(y) / S(t)``
    otherwise (``S = 1 - F``), whichever avoids cancellation.  When
    ``S(t) = 0`` the excess law is the degenerate "identically 1" one and the
    PIT is 1.  ``t = -inf`` gives ordinary PITs.
    """
    thr = effective_thresholds(pairs, t)
    tail_prob = np.clip(pairs.forecast.sf(thr), 0.0, 1.0)
    exceed = pairs.y > thr
    z = np.full(pairs.n, np.nan)
    if exceed.any():
        sub = pairs.forecast if exceed.all() else pairs.forecast[exceed]
        v = None if pairs.randomizer is None else pairs.randomizer[exceed]
        y = pairs.y[exceed]
        s_t = tail_prob[exceed]
        lower_half = s_t >= 0.5
        ze = np.ones(y.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            if lower_half.any():
                part = sub if lower_half.all() else sub[lower_half]
                f_y = _randomized_cdf(part, y[lower_half], None if v is None else v[lower_half], False)
                f_t = part.cdf(thr[exceed][lower_half])
                ze[lower_half] = (f_y - f_t) / s_t[lower_half]
            upper_half = ~lower_half & (s_t > 0)
            if upper_half.any():
                part = sub if upper_half.all() else sub[upper_half]
                s_y = _randomized_cdf(part, y[upper_half], None if v is None else v[upper_half], True)
                ze[upper_half] = 1.0 - s_y / s_t[upper_half]
        z[exceed] = np.clip(ze, 0.0, 1.0)
    return TailSample(thr, exceed, z, tail_prob)


def pit(pairs: ForecastPairs) -> np.ndarray:
    """Ordinary (randomized) PIT values ``F_i(y_i)``."""
    return tail_sample(pairs, -math.inf).z


def excess_pit(pair: ForecastObservationPair, t: float, v: float | None = None) -> float | None:
    """Excess PIT of a single pair, or None when ``y <= t``.

    ``t = -inf`` yields the ordinary PIT.  An observation on a forecast atom
    needs a uniform ``v`` to randomize between the left and right limits.
    """
    thr = pair.threshold if pair.threshold is not None else t
    if not pair.observation > thr:
        return None
    pairs = ForecastPairs(pair.forecast, [pair.observation], randomizer=None if v is None else [v])
    return float(tail_sample(pairs, thr).z[0])
