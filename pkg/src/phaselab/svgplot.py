"""Minimal static SVG line plots (axes, polylines, dashed styling)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Series", "line_plot"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    """One polyline; ``nan`` entries split it into separate pieces."""

    x: np.ndarray
    y: np.ndarray
    label: str = ""
    dashed: bool = False
    color: Optional[str] = None
    markers: bool = False


@dataclass
class _Frame:
    xlim: tuple
    ylim: tuple
    width: int
    height: int
    margin: dict = field(default_factory=lambda: {"l": 70, "r": 20, "t": 40, "b": 55})

    def px(self, x):
        x0, x1 = self.xlim
        w = self.width - self.margin["l"] - self.margin["r"]
        return self.margin["l"] + (np.asarray(x) - x0) / (x1 - x0) * w

    def py(self, y):
        y0, y1 = self.ylim
        h = self.height - self.margin["t"] - self.margin["b"]
        return self.height - self.margin["b"] - (np.asarray(y) - y0) / (y1 - y0) * h


def _limits(values, pad=0.03):
    v = np.concatenate([np.asarray(a, dtype=float).ravel() for a in values]) if values else np.array([0.0, 1.0])
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _ticks(lo, hi, count=5):
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _pieces(x, y):
    ok = np.isfinite(x) & np.isfinite(y)
    piece = []
    for xi, yi, good in zip(x, y, ok):
        if good:
            piece.append((xi, yi))
        elif piece:
            yield piece
            piece = []
    if piece:
        yield piece


def line_plot(
    series: List[Series],
    path,
    *,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 640,
    height: int = 440,
    xlim=None,
    ylim=None,
) -> None:
    """Write ``series`` as an SVG line plot to ``path``."""
    xlim = xlim or _limits([s.x for s in series])
    ylim = ylim or _limits([s.y for s in series])
    fr = _Frame(xlim, ylim, width, height)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    left, right = fr.margin["l"], width - fr.margin["r"]
    top, bottom = fr.margin["t"], height - fr.margin["b"]
    out.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" stroke="black"/>')
    for tx in _ticks(*xlim):
        X = float(fr.px(tx))
        out.append(f'<line x1="{X:.2f}" y1="{bottom}" x2="{X:.2f}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{bottom + 18}" text-anchor="middle">{tx:.4g}</text>')
    for ty in _ticks(*ylim):
        Y = float(fr.py(ty))
        out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">{ty:.4g}</text>')
    if title:
        out.append(f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{(left + right) / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="16" y="{(top + bottom) / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(top + bottom) / 2})">{escape(ylabel)}</text>'
        )
    out.append(f'<clipPath id="plot"><rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}"/></clipPath>')
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
        for piece in _pieces(x, y):
            pts = " ".join(f"{float(fr.px(a)):.2f},{float(fr.py(b)):.2f}" for a, b in piece)
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash} clip-path="url(#plot)"/>')
            if s.markers:
                for a, b in piece:
                    out.append(f'<circle cx="{float(fr.px(a)):.2f}" cy="{float(fr.py(b)):.2f}" r="2.5" fill="{color}"/>')
        if s.label:
            ly = top + 16 + 16 * i
            out.append(f'<line x1="{right - 150}" y1="{ly - 4}" x2="{right - 125}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"{dash}/>')
            out.append(f'<text x="{right - 120}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
