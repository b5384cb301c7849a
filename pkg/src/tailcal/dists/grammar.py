"""Text form of distributions: ``family(p1=v1, ...)`` with nesting.

Examples::

    normal(mu=0, sigma=1)
    censored_below(logistic(mu=1.2, s=0.8), at=0)
    ensemble(1.2, 3.4, 0.5)
    mixture(0.5, uniform(a=-1, b=1), 0.5, uniform(a=0, b=2))
    piecewise(shifted(gpd(sigma=0.8, xi=0.25), by=1), gpd(sigma=1, xi=0.25), at=5)
    excess(exponential(rate=1), t=2)

Numbers print with ``repr`` (integral values without a fractional part), so
``format(parse(s)) == s`` for every canonical string and
``parse(format(d))`` reproduces ``d`` bit for bit.

Large files are parsed in bulk: rows that differ only in their numeric
literals share a *skeleton*, each skeleton is parsed once, and its numbers
become parameter arrays of a single batched distribution.
"""

from __future__ import annotations

import ast
import re
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import SpecParseError, TailcalError
from .base import Distribution
from .families import GEV, GPD, Ensemble, Exponential, Gamma, Logistic, Normal, Uniform
from .wrappers import CensoredBelow, ExcessDistribution, Mixture, Piecewise, Scaled, Shifted, Stacked

PARAMETRIC = {cls.family: cls for cls in (Normal, Uniform, Exponential, Gamma, Logistic, GPD, GEV)}
UNARY = {"shifted": (Shifted, "by"), "scaled": (Scaled, "by"), "censored_below": (CensoredBelow, "at"),
         "excess": (ExcessDistribution, "t")}
FAMILIES = tuple(PARAMETRIC) + ("ensemble", "mixture", "piecewise") + tuple(UNARY)

_NUMBER = re.compile(r"(?<=[(,=])[-+]?(?:inf|(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)(?=[,)])")
_SPACE = re.compile(r"\s+")

Builder = Callable[[np.ndarray], Distribution]


def _skeleton(text: str) -> tuple[str, list[str]]:
    compact = _SPACE.sub("", text)
    return _NUMBER.sub("#", compact), _NUMBER.findall(compact)


def _compile(skeleton: str) -> Builder:
    """Turn a skeleton like ``normal(mu=#,sigma=#)`` into a builder taking a
    ``(rows, n_numbers)`` value matrix."""
    counter = iter(range(10**9))
    source = re.sub("#", lambda _: f"_{next(counter)}", skeleton)
    try:
        tree = ast.parse(source, mode="eval").body
    except SyntaxError as exc:
        raise SpecParseError(f"malformed distribution spec {skeleton!r}") from exc
    return _node_builder(tree)


def _value_index(node: ast.AST) -> int:
    if isinstance(node, ast.Name) and re.fullmatch(r"_\d+", node.id):
        return int(node.id[1:])
    raise SpecParseError(f"expected a number, found {ast.unparse(node)!r}")


def _node_builder(node: ast.AST) -> Builder:
    if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)):
        raise SpecParseError(f"expected family(...), found {ast.unparse(node)!r}")
    name = node.func.id
    args, kwargs = node.args, {k.arg: k.value for k in node.keywords}
    if None in kwargs:
        raise SpecParseError("'**' is not allowed in a distribution spec")

    if name in PARAMETRIC:
        cls = PARAMETRIC[name]
        if len(args) > len(cls.param_names):
            raise SpecParseError(f"{name}: too many arguments")
        idx = {p: _value_index(a) for p, a in zip(cls.param_names, args)}
        for key, val in kwargs.items():
            if key not in cls.param_names or key in idx:
                raise SpecParseError(f"{name}: unexpected or repeated parameter {key!r}")
            idx[key] = _value_index(val)
        if set(idx) != set(cls.param_names):
            raise SpecParseError(f"{name}: expected parameters {', '.join(cls.param_names)}")
        return lambda v: cls(**{k: v[:, i] for k, i in idx.items()})

    if name == "ensemble":
        if kwargs or not args:
            raise SpecParseError("ensemble: expected one or more member values")
        cols = [_value_index(a) for a in args]
        return lambda v: Ensemble(v[:, cols])

    if name == "mixture":
        if kwargs or not args or len(args) % 2:
            raise SpecParseError("mixture: expected alternating weight, component arguments")
        wcols = [_value_index(a) for a in args[::2]]
        comps = [_node_builder(a) for a in args[1::2]]
        return lambda v: Mixture([v[:, i] for i in wcols], [c(v) for c in comps])

    if name == "piecewise":
        if len(args) != 2 or set(kwargs) != {"at"}:
            raise SpecParseError("piecewise: expected piecewise(below, above, at=...)")
        below, above = (_node_builder(a) for a in args)
        at = _value_index(kwargs["at"])
        return lambda v: Piecewise(below(v), above(v), v[:, at])

    if name in UNARY:
        cls, pname = UNARY[name]
        if len(args) != 1 or set(kwargs) != {pname}:
            raise SpecParseError(f"{name}: expected {name}(distribution, {pname}=...)")
        base = _node_builder(args[0])
        col = _value_index(kwargs[pname])
        return lambda v: cls(base(v), v[:, col])

    raise SpecParseError(f"unknown distribution family {name!r}")


def _build_group(builder: Builder, numbers: Sequence[Sequence[str]], rows: Sequence[int], texts: Sequence[str]) -> Distribution:
    values = np.array(numbers, dtype=float).reshape(len(numbers), -1)
    try:
        return builder(values)
    except TailcalError:
        # find the first offending row for the message
        for r, nums in zip(rows, numbers):
            try:
                builder(np.array([nums], dtype=float).reshape(1, -1))
            except TailcalError as exc:
                raise SpecParseError(f"row {r}: {texts[r]!r}: {exc}", row=r) from exc
        raise


def parse_specs(texts: Iterable[str]) -> Distribution:
    """Parse many spec strings into one distribution with batch shape ``(n,)``."""
    texts = list(texts)
    if not texts:
        raise SpecParseError("no distribution specs given")
    groups: dict[str, tuple[list[int], list[list[str]]]] = {}
    for i, text in enumerate(texts):
        if not isinstance(text, str):
            raise SpecParseError(f"row {i}: expected a string, got {type(text).__name__}", row=i)
        skel, nums = _skeleton(text)
        rows, numbers = groups.setdefault(skel, ([], []))
        rows.append(i)
        numbers.append(nums)

    built, positions = [], []
    for skel, (rows, numbers) in groups.items():
        try:
            builder = _compile(skel)
        except SpecParseError as exc:
            raise SpecParseError(f"row {rows[0]}: {texts[rows[0]]!r}: {exc}", row=rows[0]) from exc
        built.append(_build_group(builder, numbers, rows, texts))
        positions.append(rows)
    if len(built) == 1:
        return built[0]
    return Stacked(built, positions)


def parse_spec(text: str) -> Distribution:
    """Parse one spec string into an unbatched distribution."""
    dist = parse_specs([text])
    return dist[0]


def format_spec(dist: Distribution) -> str:
    return dist.to_spec()
