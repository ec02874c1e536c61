"""Standalone SVG line and step plots."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import UsageError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=160, top=30, bottom=50)


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    v0: float | None = None  # value left of the first breakpoint in step mode

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise UsageError("series x and y must be 1d of equal length")


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0 ** e for e in range(math.floor(lo), math.ceil(hi) + 1)]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / 5)) if span > 0 else 1.0
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def emit_plot(series: Sequence[Series], kind: str = "line", log_x: bool = False, log_y: bool = False,
              title: str = "", x_label: str = "x", y_label: str = "y") -> str:
    """SVG document for the given series.

    In step mode each series is drawn right-continuous: a horizontal
    segment per constant piece and one vertical element of class "riser"
    per breakpoint.
    """
    series = [s for s in series if len(s.x)]
    if not series:
        raise UsageError("nothing to plot")
    if kind not in ("line", "step"):
        raise UsageError(f"unknown plot kind {kind!r}")
    xs = np.concatenate([s.x for s in series])
    ys = np.concatenate([s.y for s in series] + [[s.v0] for s in series if s.v0 is not None])
    if (log_x and np.any(xs <= 0)) or (log_y and np.any(ys <= 0)):
        raise UsageError("log axes need positive data")
    tx = np.log10 if log_x else (lambda v: np.asarray(v, dtype=np.float64))
    ty = np.log10 if log_y else (lambda v: np.asarray(v, dtype=np.float64))
    x_lo, x_hi = float(tx(xs).min()), float(tx(xs).max())
    y_lo, y_hi = float(ty(ys).min()), float(ty(ys).max())
    if kind == "step":
        pad = 0.05 * (x_hi - x_lo or 1.0)
        x_lo, x_hi = x_lo - pad, x_hi + pad
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (tx(v) - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return MARGIN["top"] + ph - (ty(v) - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<g class="axes" stroke="black" fill="none">'
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}"/></g>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for t in _ticks(x_lo, x_hi, log_x):
        if log_x or x_lo <= t <= x_hi:
            x = MARGIN["left"] + ((math.log10(t) if log_x else t) - x_lo) / (x_hi - x_lo) * pw
            if MARGIN["left"] - 1e-6 <= x <= MARGIN["left"] + pw + 1e-6:
                out.append(f'<line class="tick" x1="{x:.2f}" y1="{MARGIN["top"] + ph}" x2="{x:.2f}" '
                           f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
                out.append(f'<text x="{x:.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle" '
                           f'font-size="11">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi, log_y):
        y = MARGIN["top"] + ph - ((math.log10(t) if log_y else t) - y_lo) / (y_hi - y_lo) * ph
        if MARGIN["top"] - 1e-6 <= y <= MARGIN["top"] + ph + 1e-6:
            out.append(f'<line class="tick" x1="{MARGIN["left"] - 5}" y1="{y:.2f}" x2="{MARGIN["left"]}" '
                       f'y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{MARGIN["left"] - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{_fmt(t)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-size="12">{escape(x_label)}{" (log)" if log_x else ""}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(y_label)}{" (log)" if log_y else ""}</text>')
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<g class="series" stroke="{color}" fill="none" stroke-width="1.5">')
        if kind == "line":
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x, s.y))
            out.append(f'<polyline points="{pts}"/>')
        else:
            x_left, x_right = MARGIN["left"], MARGIN["left"] + pw
            prev_y = s.v0 if s.v0 is not None else (s.y[0] if len(s.y) else 0.0)
            prev_x = x_left
            for a, b in zip(s.x, s.y):
                xa = float(px(a))
                out.append(f'<line class="flat" x1="{prev_x:.2f}" y1="{py(prev_y):.2f}" x2="{xa:.2f}" y2="{py(prev_y):.2f}"/>')
                out.append(f'<line class="riser" x1="{xa:.2f}" y1="{py(prev_y):.2f}" x2="{xa:.2f}" y2="{py(b):.2f}"/>')
                out.append(f'<circle class="closed" cx="{xa:.2f}" cy="{py(b):.2f}" r="2" fill="{color}"/>')
                prev_x, prev_y = xa, b
            out.append(f'<line class="flat" x1="{prev_x:.2f}" y1="{py(prev_y):.2f}" x2="{x_right:.2f}" y2="{py(prev_y):.2f}"/>')
        out.append("</g>")
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="2"/><text x="{lx + 26}" y="{ly}" font-size="11">{escape(s.label or f"series {k + 1}")}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def series_from_csv(text: str, kind: str = "line", x: str | None = None, y: str | None = None,
                    group_by: str | None = None) -> list[Series]:
    """Read plot series from CSV text.

    Step mode expects the step-function layout (breakpoint column, value
    column, optional leading "-inf" row giving the value on the far left).
    Line mode takes the named columns (first two by default), split into
    one series per value of ``group_by``.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise UsageError("CSV has no data rows")
    header = [h.strip() for h in rows[0]]

    def col(name, default):
        if name is None:
            return default
        for i, h in enumerate(header):
            if h == name or h.split("[")[0] == name:
                return i
        raise UsageError(f"column {name!r} not in CSV header")

    xi, yi = col(x, 0), col(y, 1)
    data = rows[1:]
    if kind == "step":
        v0 = None
        if data and data[0][xi].strip() == "-inf":
            v0 = float(data[0][yi])
            data = data[1:]
        return [Series([float(r[xi]) for r in data], [float(r[yi]) for r in data],
                       header[yi].split("[")[0], v0)]
    if group_by is None:
        return [Series([float(r[xi]) for r in data], [float(r[yi]) for r in data], header[yi].split("[")[0])]
    gi = col(group_by, None)
    groups: dict[str, list] = {}
    for r in data:
        groups.setdefault(r[gi], []).append(r)
    return [Series([float(r[xi]) for r in g], [float(r[yi]) for r in g], f"{header[gi].split('[')[0]}={key}")
            for key, g in groups.items()]
