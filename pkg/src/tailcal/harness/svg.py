"""Plain SVG line charts drawn from result tables.

Plots are a pure view of CSV files already on disk: every renderer reads
its numbers back from the table, so emitting an SVG can never change them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .io import PathLike, float_column, read_table

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT = 420, 340
MARGIN = {"left": 56, "right": 16, "top": 30, "bottom": 46}


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None


def nice_ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    """Round tick positions covering ``[lo, hi]``."""
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    return np.arange(start, hi + step * 1e-6, step)


def _fmt_tick(v: float) -> str:
    return f"{v:.6g}" if abs(v) >= 1e-12 else "0"


def _limits(series: Sequence[Series], axis: str, fixed) -> tuple[float, float]:
    """Axis range from the data; entries of ``fixed`` that are not None win."""
    fixed = (None, None) if fixed is None else fixed
    if fixed[0] is not None and fixed[1] is not None:
        return float(fixed[0]), float(fixed[1])
    lo, hi = _data_limits(series, axis)
    lo = lo if fixed[0] is None else float(fixed[0])
    hi = hi if fixed[1] is None else float(fixed[1])
    if not hi > lo:
        hi = lo + 1.0
    return lo, hi


def _data_limits(series: Sequence[Series], axis: str) -> tuple[float, float]:
    vals = [getattr(s, axis) for s in series]
    if axis == "y":
        vals += [b for s in series for b in (s.lower, s.upper) if b is not None]
    flat = np.concatenate([np.asarray(v, dtype=float).ravel() for v in vals]) if vals else np.array([])
    flat = flat[np.isfinite(flat)]
    if flat.size == 0:
        return 0.0, 1.0
    lo, hi = float(flat.min()), float(flat.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _runs(mask: np.ndarray) -> list[slice]:
    """Maximal runs of True in a boolean array."""
    out, start = [], None
    for i, ok in enumerate(mask):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            out.append(slice(start, i))
            start = None
    if start is not None:
        out.append(slice(start, len(mask)))
    return out


def line_chart(
    series: Sequence[Series], title: str = "", xlabel: str = "", ylabel: str = "",
    reference: str | None = None, xlim=None, ylim=None,
) -> str:
    """One polyline per series with optional shaded bands.

    ``reference`` draws a dashed guide: ``"diagonal"`` for ``y = x`` or
    ``"one"`` for ``y = 1``; the axes then include ``[0, 1]`` or ``1``.
    ``xlim``/``ylim`` pairs may hold None for a data-driven end.  NaN points
    break the line.
    """
    x0, x1 = _limits(series, "x", xlim)
    y0, y1 = _limits(series, "y", ylim)
    if reference == "one":
        y0, y1 = min(y0, 1.0), max(y1, 1.0)
    elif reference == "diagonal":
        x0, x1 = min(x0, 0.0), max(x1, 1.0)
        y0, y1 = min(y0, 0.0), max(y1, 1.0)
    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return left + (np.asarray(x, dtype=float) - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (np.asarray(y, dtype=float) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<defs><clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath></defs>',
    ]
    for v in nice_ticks(x0, x1):
        if x0 - 1e-12 <= v <= x1 + 1e-12:
            X = float(px(v))
            out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{top + ph + 16}" text-anchor="middle">{_fmt_tick(v)}</text>')
    for v in nice_ticks(y0, y1):
        if y0 - 1e-12 <= v <= y1 + 1e-12:
            Y = float(py(v))
            out.append(f'<line x1="{left - 4}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 6}" y="{Y + 4:.2f}" text-anchor="end">{_fmt_tick(v)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append('<g clip-path="url(#plot)">')
    if reference == "diagonal":
        lo, hi = max(x0, y0), min(x1, y1)
        if hi > lo:
            out.append(f'<line x1="{float(px(lo)):.2f}" y1="{float(py(lo)):.2f}" x2="{float(px(hi)):.2f}" '
                       f'y2="{float(py(hi)):.2f}" stroke="grey" stroke-dasharray="4 3"/>')
    elif reference == "one":
        out.append(f'<line x1="{left}" y1="{float(py(1.0)):.2f}" x2="{left + pw}" y2="{float(py(1.0)):.2f}" '
                   f'stroke="grey" stroke-dasharray="4 3"/>')
    for k, s in enumerate(series):
        colour = PALETTE[k % len(PALETTE)]
        x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
        if s.lower is not None and s.upper is not None:
            lo_b, up_b = np.asarray(s.lower, dtype=float), np.asarray(s.upper, dtype=float)
            for r in _runs(np.isfinite(x) & np.isfinite(lo_b) & np.isfinite(up_b)):
                pts = list(zip(px(x[r]), py(up_b[r]))) + list(zip(px(x[r])[::-1], py(lo_b[r])[::-1]))
                path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
                out.append(f'<polygon points="{path}" fill="{colour}" fill-opacity="0.2" stroke="none"/>')
        for r in _runs(np.isfinite(x) & np.isfinite(y)):
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(x[r]), py(y[r])))
            out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
    out.append("</g>")
    for k, s in enumerate(series):
        if not s.label:
            continue
        Y = top + 12 + 13 * k
        colour = PALETTE[k % len(PALETTE)]
        out.append(f'<line x1="{left + 8}" y1="{Y - 4}" x2="{left + 24}" y2="{Y - 4}" stroke="{colour}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{left + 28}" y="{Y}">{escape(s.label)}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def series_from_table(path: PathLike, x: str, y: str, group: str | None = None,
                      band: tuple[str, str] | None = None) -> list[Series]:
    """Read one series per distinct ``group`` value (in order of appearance)."""
    _, cols = read_table(path)
    labels = cols[group] if group else [""] * len(cols[x])
    xs, ys = float_column(cols[x]), float_column(cols[y])
    lo = float_column(cols[band[0]]) if band else None
    up = float_column(cols[band[1]]) if band else None
    order = list(dict.fromkeys(labels))
    out = []
    for g in order:
        idx = np.array([i for i, lab in enumerate(labels) if lab == g], dtype=np.intp)
        has_band = lo is not None and np.any(np.isfinite(lo[idx]))
        out.append(Series(g, xs[idx], ys[idx], lo[idx] if has_band else None, up[idx] if has_band else None))
    return out


def render_table(csv_path: PathLike, svg_path: PathLike, x: str, y: str, group: str | None = None,
                 band: tuple[str, str] | None = None, **chart) -> Path:
    """Draw a CSV table as an SVG line chart next to it."""
    series = series_from_table(csv_path, x, y, group, band)
    svg_path = Path(svg_path)
    svg_path.write_text(line_chart(series, **chart), encoding="utf-8")
    return svg_path
