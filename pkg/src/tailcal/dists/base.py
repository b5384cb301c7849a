"""Core forecast-distribution abstraction.

Every distribution carries numpy parameter arrays, so a single object can
stand for one forecast or for a whole batch of forecasts (one per
forecast-observation pair).  Evaluations broadcast the argument against the
batch shape, the same way frozen ``scipy.stats`` distributions do.
"""

from __future__ import annotations

import abc
import math
from typing import Any, ClassVar

import numpy as np

from ..errors import DomainError, ParameterError

# below this magnitude GPD/GEV shapes are evaluated through their xi = 0 limit
SHAPE_EPS = 1e-8


def as_float_array(x: Any) -> np.ndarray:
    return np.asarray(x, dtype=float)


def fmt_number(x: float) -> str:
    """Shortest text that parses back to exactly ``x``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x)) if x != 0 or math.copysign(1.0, x) > 0 else "-0.0"
    return repr(x)


class Distribution(abc.ABC):
    """A (possibly batched) univariate forecast distribution.

    Subclasses implement the private ``_cdf``/``_sf``/``_quantile`` hooks on
    float arrays; the public methods validate and convert their inputs.
    """

    family: ClassVar[str]

    # ---------------------------------------------------------------- shape
    @property
    @abc.abstractmethod
    def batch_shape(self) -> tuple[int, ...]: ...

    @abc.abstractmethod
    def __getitem__(self, index: Any) -> Distribution: ...

    @abc.abstractmethod
    def broadcast_to(self, shape: tuple[int, ...]) -> Distribution: ...

    def __len__(self) -> int:
        if not self.batch_shape:
            raise TypeError("an unbatched distribution has no len()")
        return self.batch_shape[0]

    @property
    def continuous(self) -> bool:
        """True when the cdf has no atoms anywhere in the batch."""
        return True

    @property
    @abc.abstractmethod
    def support(self) -> tuple[np.ndarray, np.ndarray]: ...

    # ----------------------------------------------------------- evaluation
    def cdf(self, x: Any) -> np.ndarray:
        return self._cdf(as_float_array(x))

    def sf(self, x: Any) -> np.ndarray:
        """Survival function ``1 - cdf``, computed without cancellation."""
        return self._sf(as_float_array(x))

    def cdf_left(self, x: Any) -> np.ndarray:
        """Left-hand limit ``F(x-)`` of the cdf."""
        return self._cdf_left(as_float_array(x))

    def sf_left(self, x: Any) -> np.ndarray:
        """``P(X >= x)``, i.e. ``1 - F(x-)``."""
        return self._sf_left(as_float_array(x))

    def quantile(self, u: Any) -> np.ndarray:
        """Generalized inverse ``inf{x : F(x) >= u}`` for ``u`` in (0, 1]."""
        u = as_float_array(u)
        if not np.all((u > 0) & (u <= 1)):
            raise DomainError("quantile levels must lie in (0, 1]")
        return self._quantile(u)

    def isf(self, p: Any) -> np.ndarray:
        """Inverse survival function ``inf{x : 1 - F(x) <= p}`` for ``p`` in [0, 1)."""
        p = as_float_array(p)
        if not np.all((p >= 0) & (p < 1)):
            raise DomainError("survival levels must lie in [0, 1)")
        return self._isf(p)

    def sample(self, rng: Any, size: Any = None) -> np.ndarray:
        """Draw by inversion: ``quantile(U)`` with ``U`` from ``rng.random``."""
        shape = self.batch_shape if size is None else size
        u = as_float_array(rng.random(shape) if shape != () else rng.random())
        # rng.random() is in [0, 1); 0 is not a valid quantile level
        u = np.where(u > 0, u, 2.0**-54)
        return self._quantile(u)

    def excess(self, t: Any) -> Distribution:
        """Conditional excess distribution over the threshold ``t``."""
        from .wrappers import ExcessDistribution

        return ExcessDistribution(self, t)

    # ------------------------------------------------------------- defaults
    @abc.abstractmethod
    def _cdf(self, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _quantile(self, u: np.ndarray) -> np.ndarray: ...

    def _sf(self, x: np.ndarray) -> np.ndarray:
        return 1.0 - self._cdf(x)

    def _cdf_left(self, x: np.ndarray) -> np.ndarray:
        return self._cdf(x)

    def _sf_left(self, x: np.ndarray) -> np.ndarray:
        return 1.0 - self._cdf_left(x)

    def _isf(self, p: np.ndarray) -> np.ndarray:
        return self._quantile(1.0 - p)

    def kinks(self) -> np.ndarray:
        """Points where the cdf jumps or has a kink, shape ``batch + (k,)``."""
        return np.empty(self.batch_shape + (0,))

    # ----------------------------------------------------------------- text
    @abc.abstractmethod
    def _spec_rows(self) -> list[str]:
        """Spec text for every batch element, in C order."""

    def to_spec(self) -> str:
        if self.batch_shape != ():
            raise ValueError("to_spec() needs an unbatched distribution; use spec_rows()")
        return self._spec_rows()[0]

    def spec_rows(self) -> list[str]:
        return self._spec_rows()

    def __repr__(self) -> str:
        if self.batch_shape == ():
            return f"<{self.to_spec()}>"
        return f"<{self.family} batch{self.batch_shape}>"


class Parametric(Distribution):
    """Distribution fully described by a fixed tuple of real parameters."""

    param_names: ClassVar[tuple[str, ...]]

    def __init__(self, **params: Any) -> None:
        missing = set(self.param_names) - params.keys()
        extra = params.keys() - set(self.param_names)
        if missing or extra:
            raise ParameterError(
                f"{self.family} expects parameters {self.param_names}, got {sorted(params)}"
            )
        arrays = np.broadcast_arrays(*(as_float_array(params[k]) for k in self.param_names))
        for name, arr in zip(self.param_names, arrays):
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{self.family}: parameter {name} must be finite")
            setattr(self, name, arr)
        self._shape = arrays[0].shape
        self._validate()

    def _validate(self) -> None:
        pass

    # the parametric families are continuous: left limits equal the values
    def _sf_left(self, x: np.ndarray) -> np.ndarray:
        return self._sf(x)

    def _require_positive(self, *names: str) -> None:
        for name in names:
            if not np.all(getattr(self, name) > 0):
                raise ParameterError(f"{self.family}: parameter {name} must be positive")

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self._shape

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in self.param_names}

    def __getitem__(self, index: Any) -> Distribution:
        return type(self)(**{k: getattr(self, k)[index] for k in self.param_names})

    def broadcast_to(self, shape: tuple[int, ...]) -> Distribution:
        return type(self)(**{k: np.broadcast_to(getattr(self, k), shape) for k in self.param_names})

    def _spec_rows(self) -> list[str]:
        columns = [[fmt_number(v) for v in getattr(self, k).ravel().tolist()] for k in self.param_names]
        return [
            f"{self.family}(" + ", ".join(f"{k}={v}" for k, v in zip(self.param_names, row)) + ")"
            for row in zip(*columns)
        ]


def invert_monotone(fn, target: np.ndarray, lo: np.ndarray, hi: np.ndarray, max_iter: int = 200) -> np.ndarray:
    """Smallest ``x`` in ``[lo, hi]`` with ``fn(x) >= target`` by vectorized bisection.

    ``fn`` must be nondecreasing and satisfy ``fn(hi) >= target``; ``lo`` and
    ``hi`` must be finite.
    """
    target, lo, hi = (np.array(a, dtype=float) for a in np.broadcast_arrays(target, lo, hi))
    at_lo = fn(lo) >= target
    hi = np.where(at_lo, lo, hi)
    for _ in range(max_iter):
        mid = lo + 0.5 * (hi - lo)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        ok = fn(mid) >= target
        hi = np.where(active & ok, mid, hi)
        lo = np.where(active & ~ok, mid, lo)
    return hi
