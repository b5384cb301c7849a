"""Monte-Carlo expected scores and the mixture insensitivity experiment.

For a mixture ``F = lam H + (1 - lam) G`` the CRPS divergence satisfies

    |S(F, G) - S(G, G)| <= lam / (1 - lam) |S(G, H) - S(H, H)|,

so ``F`` scores almost like the truth ``G`` for small ``lam`` even though
it carries the tail of ``H``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..dists import Distribution, Mixture
from ..errors import DomainError, InsufficientDataError
from .crps import check_finite_mean, crps


@dataclass(frozen=True)
class ScoreEstimate:
    """Monte-Carlo estimate of an expected score ``E_G[S(F, Y)]``."""

    mean: float
    std_error: float
    n: int

    @classmethod
    def from_values(cls, values: np.ndarray) -> ScoreEstimate:
        values = np.asarray(values, dtype=float)
        n = values.size
        if n < 2:
            raise InsufficientDataError("need at least two draws for a standard error")
        return cls(math.fsum(values) / n, float(np.std(values, ddof=1) / math.sqrt(n)), n)


def expected_score(forecast: Distribution, truth: Distribution, n: int, seed: int) -> ScoreEstimate:
    """Estimate ``E_G[crps(F, Y)]`` from ``n`` draws ``Y ~ truth``."""
    if truth.batch_shape != () or forecast.batch_shape != ():
        raise DomainError("expected_score needs unbatched forecast and truth")
    check_finite_mean(forecast)
    check_finite_mean(truth)
    y = truth.sample(np.random.default_rng(seed), int(n))
    return ScoreEstimate.from_values(crps(forecast, y))


@dataclass(frozen=True)
class InsensitivityRow:
    """One mixture weight of the insensitivity experiment.

    ``gap`` estimates ``|S(F_lam, G) - S(G, G)|`` and ``bound`` estimates
    ``lam / (1 - lam) |S(G, H) - S(H, H)|``; both use common random numbers,
    so their standard errors come from per-draw score differences.
    """

    lam: float
    score_mixture: float
    score_truth: float
    gap: float
    gap_se: float
    bound: float
    bound_se: float

    @property
    def combined_se(self) -> float:
        return math.hypot(self.gap_se, self.bound_se)

    def holds(self, n_se: float = 3.0) -> bool:
        """Whether ``gap <= bound`` within ``n_se`` combined standard errors."""
        return self.gap <= self.bound + n_se * self.combined_se

    def to_dict(self) -> dict:
        out = asdict(self)
        out["holds"] = self.holds()
        return out


def mixture_insensitivity_check(
    truth: Distribution, other: Distribution, lambdas: Sequence[float], n: int, seed: int
) -> list[InsensitivityRow]:
    """Both sides of the mixture inequality for every ``lam`` in ``lambdas``.

    ``Y ~ truth`` and ``Y' ~ other`` are drawn once (``n`` each) and shared by
    every ``lam``.  ``lam = 0`` gives ``F = G`` and a gap of exactly 0.
    """
    for lam in lambdas:
        if not 0 <= lam < 1:
            raise DomainError("mixture weights must lie in [0, 1)")
    if truth.batch_shape != () or other.batch_shape != ():
        raise DomainError("truth and alternative must be unbatched")
    check_finite_mean(truth)
    check_finite_mean(other)
    rng = np.random.default_rng(seed)
    y_g = truth.sample(rng, int(n))
    y_h = other.sample(rng, int(n))
    base = crps(truth, y_g)
    div = ScoreEstimate.from_values(crps(truth, y_h) - crps(other, y_h))
    rows = []
    for lam in lambdas:
        lam = float(lam)
        if lam == 0:
            diff = np.zeros_like(base)
            mixed = base
        else:
            mixed = crps(Mixture([lam, 1 - lam], [other, truth]), y_g)
            diff = mixed - base
        gap = ScoreEstimate.from_values(diff)
        factor = lam / (1 - lam)
        rows.append(InsensitivityRow(
            lam, math.fsum(mixed) / n, math.fsum(base) / n, abs(gap.mean), gap.std_error,
            factor * abs(div.mean), factor * div.std_error,
        ))
    return rows
