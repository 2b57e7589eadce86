"""A very small SVG plotter (lines, scatter, heatmap, violin).

The CSV files written next to each figure are the source of truth; these
plots are for eyeballing only.
"""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_plot", "scatter_plot", "heatmap", "violin_plot"]

W, H = 640, 400
M = dict(left=70, right=20, top=40, bottom=50)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"]


class _Axes:
    def __init__(self, xlim, ylim, width=W, height=H):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.w, self.h = width, height

    def px(self, x):
        return M["left"] + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * (
            self.w - M["left"] - M["right"]
        )

    def py(self, y):
        return self.h - M["bottom"] - (np.asarray(y, float) - self.y0) / (self.y1 - self.y0) * (
            self.h - M["top"] - M["bottom"]
        )


def _lims(values, pad=0.05):
    v = np.concatenate([np.ravel(np.asarray(x, float)) for x in values])
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo or abs(hi) or 1.0
    return lo - pad * span, hi + pad * span


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{ax.w}" height="{ax.h}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{ax.w}" height="{ax.h}" fill="white"/>',
        f'<text x="{ax.w / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    x0, x1 = M["left"], ax.w - M["right"]
    y0, y1 = ax.h - M["bottom"], M["top"]
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="black"/>')
    for t in np.linspace(ax.x0, ax.x1, 5):
        out.append(f'<text x="{ax.px(t):.1f}" y="{y0 + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in np.linspace(ax.y0, ax.y1, 5):
        out.append(f'<text x="{x0 - 6}" y="{ax.py(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{ax.h - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2})">{escape(ylabel)}</text>'
    )
    return out


def _legend(names: Sequence[str], ax: _Axes) -> list[str]:
    out = []
    for i, name in enumerate(names):
        y = M["top"] + 14 + 16 * i
        x = ax.w - M["right"] - 140
        c = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{c}"/>')
        out.append(f'<text x="{x + 14}" y="{y}">{escape(str(name))}</text>')
    return out


def line_plot(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    hline: float | None = None,
) -> str:
    xs = [np.asarray(x, float) for x, _ in series.values()]
    ys = [np.asarray(y, float) for _, y in series.values()]
    ax = _Axes(_lims(xs, 0.0), _lims(ys + ([np.array([hline])] if hline is not None else [])))
    out = _frame(ax, title, xlabel, ylabel)
    if hline is not None:
        y = ax.py(hline)
        out.append(f'<line x1="{M["left"]}" x2="{W - M["right"]}" y1="{y:.1f}" y2="{y:.1f}" stroke="gray" stroke-dasharray="4"/>')
    for i, (x, y) in enumerate(zip(xs, ys)):
        c = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(ax.px(x), ax.py(y)) if np.isfinite(b))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
    out += _legend(list(series), ax)
    out.append("</svg>")
    return "\n".join(out)


def scatter_plot(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    xs = [np.asarray(x, float) for x, _ in series.values()]
    ys = [np.asarray(y, float) for _, y in series.values()]
    ax = _Axes(_lims(xs), _lims(ys))
    out = _frame(ax, title, xlabel, ylabel)
    for i, (x, y) in enumerate(zip(xs, ys)):
        c = PALETTE[i % len(PALETTE)]
        for a, b in zip(ax.px(x), ax.py(y)):
            out.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="3" fill="{c}" fill-opacity="0.7"/>')
    out += _legend(list(series), ax)
    out.append("</svg>")
    return "\n".join(out)


def heatmap(
    z: np.ndarray,
    x: Sequence[float],
    y: Sequence[float],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Cells ``z[i, j]`` at ``(x[j], y[i])``, shaded from dark (min) to light (max)."""
    z = np.asarray(z, float)
    x, y = np.asarray(x, float), np.asarray(y, float)
    ax = _Axes((x.min(), x.max()), (y.min(), y.max()))
    out = _frame(ax, title, xlabel, ylabel)
    lo, hi = np.nanmin(z), np.nanmax(z)
    span = hi - lo or 1.0
    dx = (ax.px(x[1]) - ax.px(x[0])) if x.size > 1 else W - M["left"] - M["right"]
    dy = (ax.py(y[0]) - ax.py(y[1])) if y.size > 1 else H - M["top"] - M["bottom"]
    for i, yy in enumerate(y):
        for j, xx in enumerate(x):
            v = int(255 * (z[i, j] - lo) / span)
            out.append(
                f'<rect x="{ax.px(xx) - dx / 2:.1f}" y="{ax.py(yy) - dy / 2:.1f}" '
                f'width="{dx + 0.5:.1f}" height="{dy + 0.5:.1f}" fill="rgb({v},{v},{min(255, v + 40)})"/>'
            )
    out.append("</svg>")
    return "\n".join(out)


def violin_plot(
    groups: Mapping[str, Sequence[float]], title: str = "", ylabel: str = "", bins: int = 30
) -> str:
    vals = [np.asarray(v, float) for v in groups.values()]
    ax = _Axes((-0.5, len(vals) - 0.5), _lims(vals))
    out = _frame(ax, title, "", ylabel)
    for i, (name, v) in enumerate(zip(groups, vals)):
        c = PALETTE[i % len(PALETTE)]
        hist, edges = np.histogram(v, bins=bins)
        width = 0.4 * hist / max(hist.max(), 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        right = [f"{ax.px(i + w):.1f},{ax.py(m):.1f}" for w, m in zip(width, mids)]
        left = [f"{ax.px(i - w):.1f},{ax.py(m):.1f}" for w, m in zip(width[::-1], mids[::-1])]
        out.append(f'<polygon points="{" ".join(right + left)}" fill="{c}" fill-opacity="0.5" stroke="{c}"/>')
        out.append(f'<text x="{ax.px(i):.1f}" y="{H - M["bottom"] + 30}" text-anchor="middle">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out)
