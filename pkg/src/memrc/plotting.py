"""Minimal deterministic SVG line and scatter plots.

Output bytes depend only on the input data: no timestamps, ids or
randomized attributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .csvio import write_text_atomic
from .errors import InputError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    kind: str = "line"  # or "scatter"


@dataclass
class PlotSpec:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 640
    height: int = 420
    series: list[Series] = field(default_factory=list)


def _num(v: float) -> str:
    return format(float(v), ".2f")


def _tick(v: float) -> str:
    return format(float(v), ".4g")


def render_svg(spec: PlotSpec) -> str:
    if not spec.series or all(len(s.x) == 0 for s in spec.series):
        raise InputError("nothing to plot")
    xs = np.concatenate([np.asarray(s.x, float) for s in spec.series])
    ys = np.concatenate([np.asarray(s.y, float) for s in spec.series])
    finite = np.isfinite(xs) & np.isfinite(ys)
    if not finite.any():
        raise InputError("no finite points to plot")
    x0, x1 = xs[finite].min(), xs[finite].max()
    y0, y1 = ys[finite].min(), ys[finite].max()
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 70, 20, 40, 50
    pw = spec.width - left - right
    ph = spec.height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect width="{spec.width}" height="{spec.height}" fill="white"/>',
        f'<text x="{spec.width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(spec.title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{_num(px(fx))}" y="{top + ph + 16}" text-anchor="middle" '
                   f'font-size="11">{_tick(fx)}</text>')
        out.append(f'<text x="{left - 6}" y="{_num(py(fy) + 4)}" text-anchor="end" '
                   f'font-size="11">{_tick(fy)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{spec.height - 10}" text-anchor="middle" '
               f'font-size="12">{escape(spec.xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(spec.ylabel)}</text>')

    for k, s in enumerate(spec.series):
        color = PALETTE[k % len(PALETTE)]
        x = np.asarray(s.x, float)
        y = np.asarray(s.y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if s.kind == "scatter":
            for a, b in zip(x[ok], y[ok]):
                out.append(f'<circle cx="{_num(px(a))}" cy="{_num(py(b))}" r="1.5" fill="{color}"/>')
        else:
            pts = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in zip(x[ok], y[ok]))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s.label:
            ly = top + 14 + 16 * k
            out.append(f'<rect x="{left + pw - 140}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
            out.append(f'<text x="{left + pw - 125}" y="{ly}" font-size="11">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(path, spec: PlotSpec):
    return write_text_atomic(path, render_svg(spec))


def table_plot(header, rows, x: str, ys: list[str], kind: str = "line", title: str = "") -> PlotSpec:
    """PlotSpec from CSV-style rows (all selected columns must be numeric)."""
    if not rows:
        raise InputError("empty table")
    idx = {name: i for i, name in enumerate(header)}
    for name in [x, *ys]:
        if name not in idx:
            raise InputError(f"no column {name!r}; have {', '.join(header)}")

    def col(name):
        return np.array([float(r[idx[name]]) if r[idx[name]] != "" else np.nan for r in rows])

    xv = col(x)
    return PlotSpec(title=title, xlabel=x, ylabel=", ".join(ys),
                    series=[Series(xv, col(y), y, kind) for y in ys])
