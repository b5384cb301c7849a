"""Ensemble model output statistics fitted by CRPS minimization.

The predictive law is censored below at ``censor_point`` with

    location = a + b * m,        scale = c * (1 + s) ** d,

where ``m`` and ``s`` are the ensemble mean and standard deviation.  The
scale is optimized as ``log c``, so it stays positive.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Sequence

import numpy as np

from ..dists import GEV, CensoredBelow, Distribution, Logistic
from ..errors import (
    DegeneratePredictorError, DivergentScoreError, DomainError, InitializationError, InsufficientDataError,
    ParameterError,
)
from .crps import crps
from .optimize import nelder_mead

EMOS_FAMILIES = ("censored_logistic", "censored_gev")
MIN_TRAINING = 10


@dataclass(frozen=True)
class EmosModel:
    """Fitted (or initial) EMOS coefficients plus fit bookkeeping."""

    family: str
    a: float
    b: float
    c: float
    d: float
    gev_shape: float | None = None
    censor_point: float = 0.0
    converged: bool = False
    n_evaluations: int = 0
    mean_crps: float = math.nan
    n_train: int = 0

    def __post_init__(self):
        if self.family not in EMOS_FAMILIES:
            raise ParameterError(f"unknown EMOS family {self.family!r}; choose from {EMOS_FAMILIES}")
        if (self.family == "censored_gev") != (self.gev_shape is not None):
            raise ParameterError("gev_shape is required for censored_gev and only for it")
        if not self.c > 0:
            raise ParameterError("scale coefficient c must be positive")

    @property
    def coefficients(self) -> tuple[float, ...]:
        base = (self.a, self.b, self.c, self.d)
        return base if self.gev_shape is None else base + (self.gev_shape,)

    def location(self, m: Any) -> np.ndarray:
        return self.a + self.b * np.asarray(m, dtype=float)

    def scale(self, s: Any) -> np.ndarray:
        return self.c * np.exp(self.d * np.log1p(np.asarray(s, dtype=float)))

    def predict(self, m: Any, s: Any) -> Distribution:
        """Batched predictive distributions for ensemble means ``m`` and sds ``s``."""
        m, s = np.broadcast_arrays(np.asarray(m, dtype=float), np.asarray(s, dtype=float))
        if np.any(s < 0):
            raise DomainError("ensemble standard deviations must be nonnegative")
        loc, scale = self.location(m), self.scale(s)
        if self.family == "censored_logistic":
            base = Logistic(mu=loc, s=scale)
        else:
            base = GEV(mu=loc, sigma=scale, xi=self.gev_shape)
        return CensoredBelow(base, self.censor_point)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> EmosModel:
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> EmosModel:
        return cls.from_dict(json.loads(text))


def ensemble_statistics(members: Any) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population standard deviation along the last axis."""
    members = np.asarray(members, dtype=float)
    return members.mean(axis=-1), members.std(axis=-1)


def _training_arrays(m, s, y):
    m, s, y = (np.asarray(v, dtype=float) for v in (m, s, y))
    if not (m.shape == s.shape == y.shape and m.ndim == 1):
        raise DomainError("m, s and y must be one-dimensional arrays of equal length")
    if m.size < MIN_TRAINING:
        raise InsufficientDataError(f"EMOS needs at least {MIN_TRAINING} training pairs, got {m.size}")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
        raise DomainError("training data must be finite")
    if np.any(s < 0):
        raise DomainError("ensemble standard deviations must be nonnegative")
    if np.all(s == 0):
        raise DegeneratePredictorError("every ensemble standard deviation is zero; the scale link is not identifiable")
    return m, s, y


def _default_init(family: str, m, y) -> tuple[float, ...]:
    # least squares from exactly rounded sums, so that row order cannot matter
    n = m.size
    m_bar, y_bar = math.fsum(m) / n, math.fsum(y) / n
    sxx = math.fsum((m - m_bar) ** 2)
    b = math.fsum((m - m_bar) * (y - y_bar)) / sxx if sxx > 0 else 0.0
    a = y_bar - b * m_bar
    resid = math.sqrt(math.fsum((y - a - b * m) ** 2) / n)
    spread = resid if resid > 0 else 1.0
    if family == "censored_logistic":
        return (float(a), float(b), spread * math.sqrt(3) / math.pi, 0.0)
    return (float(a), float(b), spread * math.sqrt(6) / math.pi, 0.0, 0.1)


def emos_fit(
    m: Any, s: Any, y: Any, family: str = "censored_logistic", init: Sequence[float] | None = None,
    budget: int = 2000, censor_point: float = 0.0,
) -> EmosModel:
    """Fit EMOS coefficients by minimizing the mean CRPS with Nelder-Mead.

    Parameters
    ----------
    m, s, y : array_like
        Ensemble means, ensemble standard deviations and observations.
    family : {"censored_logistic", "censored_gev"}
    init : sequence, optional
        Starting ``(a, b, c, d)`` (plus the GEV shape); by default a least
        squares line for the location, the residual spread for ``c`` and
        ``d = 0``.
    budget : int
        Maximum number of objective evaluations (checked between
        iterations).

    Raises
    ------
    DegeneratePredictorError
        If every ``s`` is zero.
    InitializationError
        If the objective is not finite at ``init``.
    """
    if family not in EMOS_FAMILIES:
        raise ParameterError(f"unknown EMOS family {family!r}; choose from {EMOS_FAMILIES}")
    m, s, y = _training_arrays(m, s, y)
    n_coef = 4 if family == "censored_logistic" else 5
    init = tuple(float(v) for v in (_default_init(family, m, y) if init is None else init))
    if len(init) != n_coef:
        raise InitializationError(f"{family} needs {n_coef} initial coefficients")
    if not (all(math.isfinite(v) for v in init) and init[2] > 0):
        raise InitializationError("initial coefficients must be finite with c > 0")

    def model_at(theta) -> EmosModel:
        a, b, log_c, d = (float(v) for v in theta[:4])
        shape = float(theta[4]) if n_coef == 5 else None
        return EmosModel(family, a, b, math.exp(log_c), d, shape, float(censor_point))

    def objective(theta) -> float:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                scores = crps(model_at(theta).predict(m, s), y)
        except (DivergentScoreError, ParameterError, OverflowError):
            return math.inf
        total = math.fsum(scores)
        return total / m.size if math.isfinite(total) else math.inf

    theta0 = np.array([init[0], init[1], math.log(init[2]), *init[3:]])
    if not math.isfinite(objective(theta0)):
        raise InitializationError("mean CRPS is not finite at the initial coefficients")
    res = nelder_mead(objective, theta0, budget)
    if res.n_evaluations == 0:
        # hand back the initial coefficients themselves, not exp(log(c))
        start = EmosModel(family, *init[:4], init[4] if n_coef == 5 else None, float(censor_point))
        return replace(start, mean_crps=res.fun, n_train=int(m.size))
    return replace(model_at(res.x), converged=res.converged, n_evaluations=res.n_evaluations,
                   mean_crps=res.fun, n_train=int(m.size))
