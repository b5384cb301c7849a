"""Parametric families and the empirical ensemble distribution."""

from __future__ import annotations

from typing import Any

import numpy as np
from scipy import special

from ..errors import ParameterError
from .base import SHAPE_EPS, Distribution, Parametric, as_float_array, fmt_number


def _errstate():
    return np.errstate(divide="ignore", invalid="ignore", over="ignore")


class Normal(Parametric):
    family = "normal"
    param_names = ("mu", "sigma")

    def _validate(self) -> None:
        self._require_positive("sigma")

    @property
    def support(self):
        return np.full(self.batch_shape, -np.inf), np.full(self.batch_shape, np.inf)

    def _cdf(self, x):
        return special.ndtr((x - self.mu) / self.sigma)

    def _sf(self, x):
        return special.ndtr((self.mu - x) / self.sigma)

    def _quantile(self, u):
        return self.mu + self.sigma * special.ndtri(u)

    def _isf(self, p):
        return self.mu - self.sigma * special.ndtri(p)


class Uniform(Parametric):
    family = "uniform"
    param_names = ("a", "b")

    def _validate(self) -> None:
        if not np.all(self.b > self.a):
            raise ParameterError("uniform: need a < b")

    @property
    def support(self):
        return self.a, self.b

    def _cdf(self, x):
        return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)

    def _sf(self, x):
        return np.clip((self.b - x) / (self.b - self.a), 0.0, 1.0)

    def _quantile(self, u):
        return self.a + u * (self.b - self.a)

    def _isf(self, p):
        return self.b - p * (self.b - self.a)

    def kinks(self):
        return np.stack([self.a, self.b], axis=-1)


class Exponential(Parametric):
    family = "exponential"
    param_names = ("rate",)

    def _validate(self) -> None:
        self._require_positive("rate")

    @property
    def support(self):
        return np.zeros(self.batch_shape), np.full(self.batch_shape, np.inf)

    def _sf(self, x):
        return np.exp(-self.rate * np.maximum(x, 0.0))

    def _cdf(self, x):
        return -np.expm1(-self.rate * np.maximum(x, 0.0))

    def _quantile(self, u):
        with _errstate():
            return -np.log1p(-u) / self.rate

    def _isf(self, p):
        with _errstate():
            return -np.log(p) / self.rate

    def kinks(self):
        return np.zeros(self.batch_shape + (1,))


class Gamma(Parametric):
    family = "gamma"
    param_names = ("shape", "scale")

    def _validate(self) -> None:
        self._require_positive("shape", "scale")

    @property
    def support(self):
        return np.zeros(self.batch_shape), np.full(self.batch_shape, np.inf)

    def _cdf(self, x):
        return special.gammainc(self.shape, np.maximum(x, 0.0) / self.scale)

    def _sf(self, x):
        return special.gammaincc(self.shape, np.maximum(x, 0.0) / self.scale)

    def _quantile(self, u):
        return self.scale * special.gammaincinv(self.shape, u)

    def _isf(self, p):
        return self.scale * special.gammainccinv(self.shape, p)

    def kinks(self):
        return np.zeros(self.batch_shape + (1,))


class Logistic(Parametric):
    family = "logistic"
    param_names = ("mu", "s")

    def _validate(self) -> None:
        self._require_positive("s")

    @property
    def support(self):
        return np.full(self.batch_shape, -np.inf), np.full(self.batch_shape, np.inf)

    def _cdf(self, x):
        return special.expit((x - self.mu) / self.s)

    def _sf(self, x):
        return special.expit((self.mu - x) / self.s)

    def _quantile(self, u):
        return self.mu + self.s * special.logit(u)

    def _isf(self, p):
        return self.mu - self.s * special.logit(p)


class GPD(Parametric):
    """Generalized Pareto distribution with scale ``sigma`` and shape ``xi``."""

    family = "gpd"
    param_names = ("sigma", "xi")

    def _validate(self) -> None:
        self._require_positive("sigma")

    @property
    def support(self):
        with _errstate():
            upper = np.where(self.xi < 0, -self.sigma / self.xi, np.inf)
        return np.zeros(self.batch_shape), upper

    def _sf(self, x):
        z = np.maximum(x, 0.0) / self.sigma
        small = np.abs(self.xi) < SHAPE_EPS
        xi = np.where(small, 1.0, self.xi)
        arg = xi * z
        with _errstate():
            general = np.where(arg > -1.0, np.exp(-np.log1p(np.maximum(arg, -1.0)) / xi), 0.0)
        return np.where(small, np.exp(-z), general)

    def _cdf(self, x):
        z = np.maximum(x, 0.0) / self.sigma
        small = np.abs(self.xi) < SHAPE_EPS
        xi = np.where(small, 1.0, self.xi)
        arg = xi * z
        with _errstate():
            general = np.where(arg > -1.0, -np.expm1(-np.log1p(np.maximum(arg, -1.0)) / xi), 1.0)
        return np.where(small, -np.expm1(-z), general)

    def _isf(self, p):
        small = np.abs(self.xi) < SHAPE_EPS
        xi = np.where(small, 1.0, self.xi)
        with _errstate():
            logp = np.log(p)
            general = self.sigma * np.expm1(-xi * logp) / xi
            return np.where(small, -self.sigma * logp, general)

    def _quantile(self, u):
        small = np.abs(self.xi) < SHAPE_EPS
        xi = np.where(small, 1.0, self.xi)
        with _errstate():
            logp = np.log1p(-u)
            general = self.sigma * np.expm1(-xi * logp) / xi
            return np.where(small, -self.sigma * logp, general)

    def kinks(self):
        lo, hi = self.support
        return np.stack([lo, np.where(np.isfinite(hi), hi, lo)], axis=-1)


class GEV(Parametric):
    """Generalized extreme value distribution, cdf ``exp(-(1 + xi z)^(-1/xi))``."""

    family = "gev"
    param_names = ("mu", "sigma", "xi")

    def _validate(self) -> None:
        self._require_positive("sigma")

    @property
    def support(self):
        with _errstate():
            end = self.mu - self.sigma / self.xi
        lower = np.where(self.xi > SHAPE_EPS, end, -np.inf)
        upper = np.where(self.xi < -SHAPE_EPS, end, np.inf)
        return lower, upper

    def _tail_term(self, x):
        """``-log F(x)``, with the convention 0 / inf outside the support."""
        z = (x - self.mu) / self.sigma
        small = np.abs(self.xi) < SHAPE_EPS
        xi = np.where(small, 1.0, self.xi)
        arg = xi * z
        with _errstate():
            inside = np.exp(-np.log1p(np.maximum(arg, -1.0)) / xi)
            outside = np.where(xi > 0, np.inf, 0.0)
            general = np.where(arg > -1.0, inside, outside)
            return np.where(small, np.exp(-z), general)

    def _cdf(self, x):
        return np.exp(-self._tail_term(x))

    def _sf(self, x):
        return -np.expm1(-self._tail_term(x))

    def _from_log_term(self, logl):
        small = np.abs(self.xi) < SHAPE_EPS
        xi = np.where(small, 1.0, self.xi)
        with _errstate():
            general = self.mu + self.sigma * np.expm1(-xi * logl) / xi
            return np.where(small, self.mu - self.sigma * logl, general)

    def _quantile(self, u):
        with _errstate():
            return self._from_log_term(np.log(-np.log(u)))

    def _isf(self, p):
        with _errstate():
            return self._from_log_term(np.log(-np.log1p(-p)))


class Ensemble(Distribution):
    """Empirical distribution of ``m`` equally weighted members.

    ``members`` has shape ``batch + (m,)``; the cdf jumps by ``k/m`` at a
    value shared by ``k`` members.
    """

    family = "ensemble"

    def __init__(self, members: Any) -> None:
        members = as_float_array(members)
        if members.ndim == 0 or members.shape[-1] == 0:
            raise ParameterError("ensemble: need at least one member")
        if not np.all(np.isfinite(members)):
            raise ParameterError("ensemble: members must be finite")
        self.members = members
        self.sorted = np.sort(members, axis=-1)

    @property
    def m(self) -> int:
        return self.members.shape[-1]

    @property
    def batch_shape(self):
        return self.members.shape[:-1]

    @property
    def continuous(self) -> bool:
        return False

    @property
    def support(self):
        return self.sorted[..., 0], self.sorted[..., -1]

    def __getitem__(self, index):
        if not isinstance(index, tuple):
            index = (index,)
        return Ensemble(self.members[index + (slice(None),)])

    def broadcast_to(self, shape):
        return Ensemble(np.broadcast_to(self.members, tuple(shape) + (self.m,)))

    def _count(self, x, side: str) -> np.ndarray:
        if self.sorted.ndim == 1:
            return np.searchsorted(self.sorted, x, side=side).astype(float)
        xe = np.asarray(x)[..., None]
        hits = self.sorted <= xe if side == "right" else self.sorted < xe
        return hits.sum(axis=-1, dtype=float)

    def _cdf(self, x):
        return self._count(x, "right") / self.m

    def _cdf_left(self, x):
        return self._count(x, "left") / self.m

    def _sf(self, x):
        return (self.m - self._count(x, "right")) / self.m

    def _sf_left(self, x):
        return (self.m - self._count(x, "left")) / self.m

    def _quantile(self, u):
        # tolerance keeps u = k/m (up to rounding) on the k-th order statistic
        j = np.clip(np.ceil(u * self.m - 1e-9), 1, self.m).astype(np.intp) - 1
        if self.sorted.ndim == 1:
            return self.sorted[j]
        j = np.broadcast_to(j, np.broadcast_shapes(j.shape, self.batch_shape))
        srt = np.broadcast_to(self.sorted, j.shape + (self.m,))
        return np.take_along_axis(srt, j[..., None], axis=-1)[..., 0]

    def _isf(self, p):
        return self._quantile(1.0 - p)

    def kinks(self):
        return self.sorted

    def _spec_rows(self):
        flat = self.members.reshape(-1, self.m)
        return ["ensemble(" + ", ".join(fmt_number(v) for v in row) + ")" for row in flat.tolist()]
