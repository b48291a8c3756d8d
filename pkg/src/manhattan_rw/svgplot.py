"""Minimal log-log SVG plots: data series with error bars and fitted-law overlays.

Plots are derived artifacts; output is plain text and depends only on the
inputs, so regenerating a plot is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=78, right=20, top=40, bottom=58)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    err: np.ndarray | None = None
    label: str = ""
    line: bool = False  # draw as a polyline (fits) rather than markers

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.err is not None:
            self.err = np.asarray(self.err, dtype=np.float64)


@dataclass
class LogLogPlot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)

    def add(self, x, y, err=None, label: str = "", line: bool = False) -> "LogLogPlot":
        self.series.append(Series(x, y, err, label, line))
        return self

    # -- geometry -------------------------------------------------------------

    def _ranges(self):
        xs, ys = [], []
        for s in self.series:
            ok = (s.x > 0) & (s.y > 0) & np.isfinite(s.x) & np.isfinite(s.y)
            xs.append(s.x[ok])
            ys.append(s.y[ok])
            if s.err is not None:
                lo = s.y[ok] - s.err[ok]
                ys.append(lo[lo > 0])
                ys.append(s.y[ok] + s.err[ok])
        x = np.concatenate(xs) if xs else np.array([])
        y = np.concatenate(ys) if ys else np.array([])
        if x.size == 0 or y.size == 0:
            raise ValueError("nothing positive to plot on log axes")
        return _decades(x.min(), x.max()), _decades(y.min(), y.max())

    def render(self) -> str:
        (x0, x1), (y0, y1) = self._ranges()
        L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]

        def px(x):
            return L + (math.log10(x) - x0) / (x1 - x0) * (R - L)

        def py(y):
            return B - (math.log10(y) - y0) / (y1 - y0) * (B - T)

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
               f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
               f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
        for e in range(x0, x1 + 1):
            xp = px(10.0 ** e)
            out.append(f'<line x1="{xp:.2f}" y1="{T}" x2="{xp:.2f}" y2="{B}" stroke="#e5e5e5"/>')
            out.append(f'<text x="{xp:.2f}" y="{B + 18}" text-anchor="middle">1e{e}</text>')
        for e in range(y0, y1 + 1):
            yp = py(10.0 ** e)
            out.append(f'<line x1="{L}" y1="{yp:.2f}" x2="{R}" y2="{yp:.2f}" stroke="#e5e5e5"/>')
            out.append(f'<text x="{L - 6}" y="{yp + 4:.2f}" text-anchor="end">1e{e}</text>')
        out.append(f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>')
        if self.title:
            out.append(f'<text x="{(L + R) / 2:.1f}" y="{T - 14}" text-anchor="middle" '
                       f'font-size="14">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">'
                       f'{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="16" y="{(T + B) / 2:.1f}" text-anchor="middle" '
                       f'transform="rotate(-90 16 {(T + B) / 2:.1f})">{escape(self.ylabel)}</text>')

        for k, s in enumerate(self.series):
            color = PALETTE[k % len(PALETTE)]
            ok = (s.x > 0) & (s.y > 0) & np.isfinite(s.x) & np.isfinite(s.y)
            if s.line:
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x[ok], s.y[ok]))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                           f'stroke-width="1.5" stroke-dasharray="6 3"/>')
            else:
                for i in np.flatnonzero(ok):
                    cx, cy = px(s.x[i]), py(s.y[i])
                    if s.err is not None and s.err[i] > 0:
                        lo = s.y[i] - s.err[i]
                        ylo = py(lo) if lo > 0 else B
                        yhi = py(s.y[i] + s.err[i])
                        out.append(f'<line x1="{cx:.2f}" y1="{ylo:.2f}" x2="{cx:.2f}" y2="{yhi:.2f}" '
                                   f'stroke="{color}"/>')
                    out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2.2" fill="{color}"/>')
            if s.label:
                ly = T + 16 + 16 * k
                out.append(f'<rect x="{L + 10}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
                out.append(f'<text x="{L + 26}" y="{ly + 1}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _decades(lo: float, hi: float) -> tuple[int, int]:
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    return (a, b) if b > a else (a, a + 1)
