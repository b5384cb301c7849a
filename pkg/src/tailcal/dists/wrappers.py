"""Distributions built from other distributions: transforms, censoring,
mixtures, splices, threshold excesses, and heterogeneous stacks."""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from ..errors import ParameterError
from .base import Distribution, as_float_array, fmt_number, invert_monotone


def _common_shape(*shapes: tuple[int, ...]) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError as exc:
        raise ParameterError(f"incompatible batch shapes {shapes}") from exc


def _fit(dist: Distribution, shape: tuple[int, ...]) -> Distribution:
    return dist if dist.batch_shape == shape else dist.broadcast_to(shape)


def _param(value: Any, name: str, family: str) -> np.ndarray:
    arr = as_float_array(value)
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{family}: parameter {name} must be finite")
    return arr


class _Unary(Distribution):
    """Wrapper around one base distribution plus one real parameter array."""

    param_name: str

    def __init__(self, base: Distribution, value: Any) -> None:
        value = _param(value, self.param_name, self.family)
        shape = _common_shape(base.batch_shape, value.shape)
        self.base = _fit(base, shape)
        self.value = np.broadcast_to(value, shape)
        self._validate()

    def _validate(self) -> None:
        pass

    @property
    def batch_shape(self):
        return self.base.batch_shape

    @property
    def continuous(self):
        return self.base.continuous

    def __getitem__(self, index):
        return type(self)(self.base[index], self.value[index])

    def broadcast_to(self, shape):
        return type(self)(self.base.broadcast_to(shape), np.broadcast_to(self.value, shape))

    def _spec_rows(self):
        inner = self.base.spec_rows()
        vals = [fmt_number(v) for v in self.value.ravel().tolist()]
        return [f"{self.family}({d}, {self.param_name}={v})" for d, v in zip(inner, vals)]


class Shifted(_Unary):
    """Law of ``X + by``."""

    family = "shifted"
    param_name = "by"

    @property
    def by(self):
        return self.value

    @property
    def support(self):
        lo, hi = self.base.support
        return lo + self.by, hi + self.by

    def _cdf(self, x):
        return self.base._cdf(x - self.by)

    def _sf(self, x):
        return self.base._sf(x - self.by)

    def _cdf_left(self, x):
        return self.base._cdf_left(x - self.by)

    def _sf_left(self, x):
        return self.base._sf_left(x - self.by)

    def _quantile(self, u):
        return self.base._quantile(u) + self.by

    def _isf(self, p):
        return self.base._isf(p) + self.by

    def kinks(self):
        return self.base.kinks() + self.by[..., None]


class Scaled(_Unary):
    """Law of ``by * X`` for ``by > 0``."""

    family = "scaled"
    param_name = "by"

    def _validate(self):
        if not np.all(self.value > 0):
            raise ParameterError("scaled: factor must be positive")

    @property
    def by(self):
        return self.value

    @property
    def support(self):
        lo, hi = self.base.support
        return lo * self.by, hi * self.by

    def _cdf(self, x):
        return self.base._cdf(x / self.by)

    def _sf(self, x):
        return self.base._sf(x / self.by)

    def _cdf_left(self, x):
        return self.base._cdf_left(x / self.by)

    def _sf_left(self, x):
        return self.base._sf_left(x / self.by)

    def _quantile(self, u):
        return self.base._quantile(u) * self.by

    def _isf(self, p):
        return self.base._isf(p) * self.by

    def kinks(self):
        return self.base.kinks() * self.by[..., None]


class CensoredBelow(_Unary):
    """Law of ``max(X, at)``: an atom of mass ``F(at)`` at ``at``."""

    family = "censored_below"
    param_name = "at"

    @property
    def at(self):
        return self.value

    @property
    def continuous(self):
        return self.base.continuous and not np.any(self.base._cdf(self.at) > 0)

    @property
    def support(self):
        lo, hi = self.base.support
        return np.maximum(lo, self.at), np.maximum(hi, self.at)

    def _cdf(self, x):
        return np.where(x < self.at, 0.0, self.base._cdf(x))

    def _sf(self, x):
        return np.where(x < self.at, 1.0, self.base._sf(x))

    def _cdf_left(self, x):
        return np.where(x <= self.at, 0.0, self.base._cdf_left(x))

    def _sf_left(self, x):
        return np.where(x <= self.at, 1.0, self.base._sf_left(x))

    # levels inside the atom map to ``at`` exactly, without inverting the base
    def _quantile(self, u):
        return np.where(u <= self.base._cdf(self.at), self.at, np.maximum(self.base._quantile(u), self.at))

    def _isf(self, p):
        return np.where(p >= self.base._sf(self.at), self.at, np.maximum(self.base._isf(p), self.at))

    def kinks(self):
        base = self.base.kinks()
        at = self.at[..., None]
        return np.concatenate([at, np.maximum(base, at)], axis=-1)


class Mixture(Distribution):
    """Finite mixture ``sum_k w_k F_k``."""

    family = "mixture"

    def __init__(self, weights: Sequence[Any], components: Sequence[Distribution]) -> None:
        if len(weights) != len(components) or not components:
            raise ParameterError("mixture: need one weight per component and at least one component")
        ws = [_param(w, "weight", self.family) for w in weights]
        shape = _common_shape(*(w.shape for w in ws), *(c.batch_shape for c in components))
        self.weights = [np.broadcast_to(w, shape) for w in ws]
        self.components = [_fit(c, shape) for c in components]
        total = np.sum(self.weights, axis=0)
        if any(np.any(w < 0) for w in self.weights) or not np.all(np.abs(total - 1.0) <= 1e-9):
            raise ParameterError("mixture: weights must be nonnegative and sum to 1")
        self._shape = shape

    @property
    def batch_shape(self):
        return self._shape

    @property
    def continuous(self):
        return all(c.continuous for c, w in zip(self.components, self.weights) if np.any(w > 0))

    @property
    def support(self):
        los, his = zip(*(c.support for c in self.components))
        live = [w > 0 for w in self.weights]
        lo = np.min([np.where(m, l, np.inf) for m, l in zip(live, los)], axis=0)
        hi = np.max([np.where(m, h, -np.inf) for m, h in zip(live, his)], axis=0)
        return lo, hi

    def __getitem__(self, index):
        return Mixture([w[index] for w in self.weights], [c[index] for c in self.components])

    def broadcast_to(self, shape):
        return Mixture(
            [np.broadcast_to(w, shape) for w in self.weights],
            [c.broadcast_to(shape) for c in self.components],
        )

    def _combine(self, method: str, x):
        return sum(w * getattr(c, method)(x) for w, c in zip(self.weights, self.components))

    def _cdf(self, x):
        return np.clip(self._combine("_cdf", x), 0.0, 1.0)

    def _sf(self, x):
        return np.clip(self._combine("_sf", x), 0.0, 1.0)

    def _cdf_left(self, x):
        return np.clip(self._combine("_cdf_left", x), 0.0, 1.0)

    def _sf_left(self, x):
        return np.clip(self._combine("_sf_left", x), 0.0, 1.0)

    def _bracket(self, method: str, level):
        vals = np.array(np.broadcast_arrays(*(getattr(c, method)(level) for c in self.components)))
        return vals.min(axis=0), vals.max(axis=0)

    def _quantile(self, u):
        top = u >= 1.0
        shape = np.broadcast_shapes(np.shape(u), self._shape)
        out = np.empty(shape)
        out[...] = self.support[1]
        if np.any(~top):
            safe_u = np.where(top, 0.5, u)
            lo, hi = self._bracket("_quantile", safe_u)
            res = invert_monotone(self._cdf, safe_u, lo, hi)
            out = np.where(top, out, res)
        return out

    def _isf(self, p):
        top = p <= 0.0
        shape = np.broadcast_shapes(np.shape(p), self._shape)
        out = np.empty(shape)
        out[...] = self.support[1]
        if np.any(~top):
            safe_p = np.where(top, 0.5, p)
            lo, hi = self._bracket("_isf", safe_p)
            res = invert_monotone(lambda x: -self._sf(x), -safe_p, lo, hi)
            out = np.where(top, out, res)
        return out

    def kinks(self):
        return np.concatenate([c.kinks() for c in self.components], axis=-1)

    def _spec_rows(self):
        inner = [c.spec_rows() for c in self.components]
        ws = [[fmt_number(v) for v in w.ravel().tolist()] for w in self.weights]
        rows = []
        for i in range(len(inner[0])):
            parts = [f"{ws[k][i]}, {inner[k][i]}" for k in range(len(inner))]
            rows.append("mixture(" + ", ".join(parts) + ")")
        return rows


class Piecewise(Distribution):
    """cdf of ``below`` on ``(-inf, at)`` spliced to the cdf of ``above`` on ``[at, inf)``."""

    family = "piecewise"

    def __init__(self, below: Distribution, above: Distribution, at: Any) -> None:
        at = _param(at, "at", self.family)
        shape = _common_shape(below.batch_shape, above.batch_shape, at.shape)
        self.below = _fit(below, shape)
        self.above = _fit(above, shape)
        self.at = np.broadcast_to(at, shape)
        self.jump = self.above._cdf(self.at) - self.below._cdf_left(self.at)
        if np.any(self.jump < -1e-12):
            raise ParameterError("piecewise: cdf would decrease across the splice point")

    @property
    def batch_shape(self):
        return self.at.shape

    @property
    def continuous(self):
        return self.below.continuous and self.above.continuous and not np.any(self.jump > 1e-12)

    @property
    def support(self):
        lo_b, _ = self.below.support
        _, hi_a = self.above.support
        lo_a, _ = self.above.support
        lower = np.where(self.below._cdf_left(self.at) > 0, lo_b, np.maximum(lo_a, self.at))
        return lower, np.maximum(hi_a, self.at)

    def __getitem__(self, index):
        return Piecewise(self.below[index], self.above[index], self.at[index])

    def broadcast_to(self, shape):
        return Piecewise(self.below.broadcast_to(shape), self.above.broadcast_to(shape), np.broadcast_to(self.at, shape))

    def _cdf(self, x):
        return np.where(x < self.at, self.below._cdf(x), self.above._cdf(x))

    def _sf(self, x):
        return np.where(x < self.at, self.below._sf(x), self.above._sf(x))

    def _cdf_left(self, x):
        return np.where(x <= self.at, self.below._cdf_left(x), self.above._cdf_left(x))

    def _sf_left(self, x):
        return np.where(x <= self.at, self.below._sf_left(x), self.above._sf_left(x))

    def _quantile(self, u):
        left = u <= self.below._cdf_left(self.at)
        q_below = self.below._quantile(np.where(left, u, 0.5))
        q_above = np.maximum(self.above._quantile(u), self.at)
        return np.where(left, np.minimum(q_below, self.at), q_above)

    def _isf(self, p):
        left = p >= self.below._sf_left(self.at)
        q_below = self.below._isf(np.where(left, p, 0.5))
        q_above = np.maximum(self.above._isf(p), self.at)
        return np.where(left, np.minimum(q_below, self.at), q_above)

    def kinks(self):
        return np.concatenate([self.at[..., None], self.below.kinks(), self.above.kinks()], axis=-1)

    def _spec_rows(self):
        ats = [fmt_number(v) for v in self.at.ravel().tolist()]
        return [
            f"piecewise({b}, {a}, at={t})"
            for b, a, t in zip(self.below.spec_rows(), self.above.spec_rows(), ats)
        ]


class ExcessDistribution(Distribution):
    """Conditional law of ``X - t`` given ``X > t``.

    Where ``F(t) = 1`` the excess law is undefined; it is then taken to be
    the point mass at 0 (cdf identically 1 on ``[0, inf)``) and ``degenerate``
    is set for that batch element.
    """

    family = "excess"

    def __init__(self, parent: Distribution, t: Any) -> None:
        t = _param(t, "t", self.family)
        shape = _common_shape(parent.batch_shape, t.shape)
        self.parent = _fit(parent, shape)
        self.t = np.broadcast_to(t, shape)
        self.tail_mass = self.parent._sf(self.t)
        self.degenerate = self.tail_mass <= 0.0
        self._mass = np.where(self.degenerate, 1.0, self.tail_mass)

    @property
    def batch_shape(self):
        return self.t.shape

    @property
    def continuous(self):
        return self.parent.continuous and not np.any(self.degenerate)

    @property
    def support(self):
        _, hi = self.parent.support
        upper = np.where(self.degenerate, 0.0, np.maximum(hi - self.t, 0.0))
        return np.zeros(self.batch_shape), upper

    def __getitem__(self, index):
        return ExcessDistribution(self.parent[index], self.t[index])

    def broadcast_to(self, shape):
        return ExcessDistribution(self.parent.broadcast_to(shape), np.broadcast_to(self.t, shape))

    def _sf(self, x):
        ratio = np.clip(self.parent._sf(self.t + x) / self._mass, 0.0, 1.0)
        return np.where(x < 0, 1.0, np.where(self.degenerate, 0.0, ratio))

    def _cdf(self, x):
        return 1.0 - self._sf(x)

    def _sf_left(self, x):
        ratio = np.clip(self.parent._sf_left(self.t + x) / self._mass, 0.0, 1.0)
        return np.where(x <= 0, 1.0, np.where(self.degenerate, 0.0, ratio))

    def _cdf_left(self, x):
        return 1.0 - self._sf_left(x)

    def _isf(self, p):
        q = self.parent._isf(self._mass * p) - self.t
        return np.where(self.degenerate, 0.0, np.maximum(q, 0.0))

    def _quantile(self, u):
        return self._isf(1.0 - u)

    def kinks(self):
        return np.maximum(self.parent.kinks() - self.t[..., None], 0.0)

    def _spec_rows(self):
        ts = [fmt_number(v) for v in self.t.ravel().tolist()]
        return [f"excess({d}, t={t})" for d, t in zip(self.parent.spec_rows(), ts)]


class Stacked(Distribution):
    """One-dimensional batch assembled from differently-structured groups.

    ``groups[g]`` is a 1-D batched distribution whose elements sit at batch
    positions ``positions[g]``.  Evaluations take the batch along the last
    axis of the argument.
    """

    family = "stacked"

    def __init__(self, groups: Sequence[Distribution], positions: Sequence[Any]) -> None:
        self.groups = list(groups)
        self.positions = [np.asarray(p, dtype=np.intp) for p in positions]
        n = sum(len(p) for p in self.positions)
        self.group_of = np.full(n, -1, dtype=np.intp)
        self.rank = np.empty(n, dtype=np.intp)
        for g, (dist, pos) in enumerate(zip(self.groups, self.positions)):
            if dist.batch_shape != (len(pos),):
                raise ParameterError("stacked: group shape does not match its positions")
            self.group_of[pos] = g
            self.rank[pos] = np.arange(len(pos))
        if np.any(self.group_of < 0):
            raise ParameterError("stacked: positions must cover 0..n-1 exactly once")
        self._n = n

    @property
    def batch_shape(self):
        return (self._n,)

    @property
    def continuous(self):
        return all(g.continuous for g in self.groups)

    @property
    def support(self):
        lo = np.empty(self._n)
        hi = np.empty(self._n)
        for dist, pos in zip(self.groups, self.positions):
            lo[pos], hi[pos] = dist.support
        return lo, hi

    def __getitem__(self, index):
        sel = np.arange(self._n)[index]
        if np.ndim(sel) == 0:
            return self.groups[self.group_of[sel]][int(self.rank[sel])]
        sel = sel.ravel()
        groups, positions = [], []
        for g, dist in enumerate(self.groups):
            where = np.nonzero(self.group_of[sel] == g)[0]
            if where.size:
                groups.append(dist[self.rank[sel[where]]])
                positions.append(where)
        return Stacked(groups, positions)

    def broadcast_to(self, shape):
        if tuple(shape) != self.batch_shape:
            raise ParameterError("a stacked distribution cannot be broadcast to a new shape")
        return self

    def _apply(self, method: str, x):
        x = np.asarray(x, dtype=float)
        shape = np.broadcast_shapes(x.shape, (self._n,))
        xb = np.broadcast_to(x, shape)
        out = np.empty(shape)
        for dist, pos in zip(self.groups, self.positions):
            out[..., pos] = getattr(dist, method)(xb[..., pos])
        return out

    def _cdf(self, x):
        return self._apply("_cdf", x)

    def _sf(self, x):
        return self._apply("_sf", x)

    def _cdf_left(self, x):
        return self._apply("_cdf_left", x)

    def _sf_left(self, x):
        return self._apply("_sf_left", x)

    def _quantile(self, u):
        return self._apply("_quantile", u)

    def _isf(self, p):
        return self._apply("_isf", p)

    def kinks(self):
        per = [d.kinks() for d in self.groups]
        width = max((k.shape[-1] for k in per), default=0)
        out = np.full((self._n, width), np.nan)
        for k, pos in zip(per, self.positions):
            # pad by repeating the last kink (or NaN when a group has none)
            if k.shape[-1]:
                pad = np.repeat(k[:, -1:], width - k.shape[-1], axis=1)
                out[pos] = np.concatenate([k, pad], axis=1)
        return out

    def _spec_rows(self):
        rows = [""] * self._n
        for dist, pos in zip(self.groups, self.positions):
            for i, s in zip(pos.tolist(), dist.spec_rows()):
                rows[i] = s
        return rows
