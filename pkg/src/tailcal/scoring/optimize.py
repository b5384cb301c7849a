"""Budgeted Nelder-Mead minimization with one restart."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize


@dataclass(frozen=True)
class OptimizeResult:
    x: np.ndarray
    fun: float
    n_evaluations: int
    converged: bool


def nelder_mead(fun: Callable[[np.ndarray], float], x0, budget: int, xatol: float = 1e-6) -> OptimizeResult:
    """Minimize ``fun`` from ``x0`` with at most about ``budget`` evaluations.

    Standard coefficients (reflection 1, expansion 2, contraction 1/2,
    shrink 1/2).  Convergence means every simplex vertex lies within
    ``xatol`` of the best one.  After the first run the search restarts
    once from the best vertex with the remaining budget; the flag reports
    the state of the last run.  ``budget = 0`` returns ``x0`` unevaluated
    by the optimizer and flagged as not converged.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = float(fun(x))
    used, converged = 0, False
    for _ in range(2):
        left = int(budget) - used
        if left <= 0:
            break
        res = minimize(
            fun, x, method="Nelder-Mead",
            options={"maxfev": left, "maxiter": 10**9, "xatol": xatol, "fatol": np.inf},
        )
        used += int(res.nfev)
        converged = bool(res.status == 0)
        if res.fun <= fx:
            x, fx = np.asarray(res.x, dtype=float), float(res.fun)
        if not converged:
            break
    return OptimizeResult(x, fx, used, converged)
