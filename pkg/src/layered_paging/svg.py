"""Minimal SVG charts (line, box, heatmap) with deterministic output."""
from __future__ import annotations

import math
from typing import Mapping, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f"]

W, H = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 55


def _f(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 6) -> list:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(1, count - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = [round(start, 10)]
    while ticks[-1] < hi - step * 1e-9:
        ticks.append(round(start + len(ticks) * step, 10))
    return ticks


def _tick_label(v: float) -> str:
    return f"{v:g}" if abs(v) < 1e6 else f"{v:.3g}"


class _Canvas:
    def __init__(self, title: str, width: int = W, height: int = H):
        self.w, self.h = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        ]

    def add(self, s: str):
        self.parts.append(s)

    def text(self, x, y, s, anchor="middle", **attrs):
        extra = "".join(f' {k.replace("_", "-")}="{v}"' for k, v in attrs.items())
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{extra}>{escape(str(s))}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _axes(c: _Canvas, xticks, yticks, sx, sy, xlabel, ylabel, x0, x1, y0, y1, xtick_labels=None):
    c.add(f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" height="{_f(y0 - y1)}" fill="none" stroke="#333"/>')
    for v in yticks:
        y = sy(v)
        c.add(f'<line x1="{_f(x0)}" y1="{_f(y)}" x2="{_f(x1)}" y2="{_f(y)}" stroke="#ddd"/>')
        c.text(x0 - 6, y + 4, _tick_label(v), anchor="end")
    for i, v in enumerate(xticks):
        x = sx(v)
        c.add(f'<line x1="{_f(x)}" y1="{_f(y0)}" x2="{_f(x)}" y2="{_f(y0 + 5)}" stroke="#333"/>')
        c.text(x, y0 + 18, xtick_labels[i] if xtick_labels else _tick_label(v))
    c.text((x0 + x1) / 2, c.h - 12, xlabel)
    c.text(16, (y0 + y1) / 2, ylabel, transform=f"rotate(-90 16 {_f((y0 + y1) / 2)})")


def line_chart(series: Mapping[str, Tuple[Sequence[float], Sequence[float]]], title: str,
               xlabel: str, ylabel: str, hline: Optional[float] = None) -> str:
    c = _Canvas(title)
    x0, x1, y1, y0 = LEFT, W - RIGHT, TOP, H - BOTTOM
    xs = [x for xs_, _ in series.values() for x in xs_]
    ys = [y for _, ys_ in series.values() for y in ys_ if y is not None and math.isfinite(y)]
    if hline is not None:
        ys.append(hline)
    xlo, xhi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    ylo, yhi = (min(0.0, min(ys)), max(ys)) if ys else (0.0, 1.0)
    yt = _nice_ticks(ylo, yhi)
    ylo, yhi = yt[0], yt[-1]
    xt = _nice_ticks(xlo, xhi, 8)
    xt = [v for v in xt if xlo <= v <= xhi] or [xlo]
    span_x = (xhi - xlo) or 1.0
    span_y = (yhi - ylo) or 1.0

    def sx(v):
        return x0 + (v - xlo) / span_x * (x1 - x0)

    def sy(v):
        return y0 - (v - ylo) / span_y * (y0 - y1)

    _axes(c, xt, yt, sx, sy, xlabel, ylabel, x0, x1, y0, y1)
    if hline is not None:
        c.add(f'<line x1="{_f(x0)}" y1="{_f(sy(hline))}" x2="{_f(x1)}" y2="{_f(sy(hline))}" '
              f'stroke="#999" stroke-dasharray="4 3"/>')
    for i, (name, (sxs, sys_)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [(sx(x), sy(y)) for x, y in zip(sxs, sys_) if y is not None and math.isfinite(y)]
        if pts:
            path = " ".join(f"{_f(px)},{_f(py)}" for px, py in pts)
            c.add(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        ly = TOP + 18 * i + 10
        c.add(f'<line x1="{W - RIGHT + 12}" y1="{ly}" x2="{W - RIGHT + 32}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        c.text(W - RIGHT + 38, ly + 4, name, anchor="start")
    return c.render()


def box_plot(stats: Mapping[str, Sequence[float]], title: str, ylabel: str, hline: Optional[float] = 1.0) -> str:
    """``stats[name] = (min, q1, median, q3, max)``."""
    c = _Canvas(title)
    x0, x1, y1, y0 = LEFT, W - 30, TOP, H - BOTTOM
    vals = [v for s in stats.values() for v in s]
    if hline is not None:
        vals.append(hline)
    yt = _nice_ticks(min(vals) if vals else 0.0, max(vals) if vals else 1.0)
    ylo, yhi = yt[0], yt[-1]
    span = (yhi - ylo) or 1.0
    names = list(stats)
    slot = (x1 - x0) / max(1, len(names))

    def sx(i):
        return x0 + slot * (i + 0.5)

    def sy(v):
        return y0 - (v - ylo) / span * (y0 - y1)

    _axes(c, list(range(len(names))), yt, sx, sy, "policy", ylabel, x0, x1, y0, y1, xtick_labels=names)
    if hline is not None:
        c.add(f'<line x1="{_f(x0)}" y1="{_f(sy(hline))}" x2="{_f(x1)}" y2="{_f(sy(hline))}" '
              f'stroke="#999" stroke-dasharray="4 3"/>')
    half = min(30.0, slot * 0.3)
    for i, name in enumerate(names):
        lo, q1, med, q3, hi = stats[name]
        x = sx(i)
        color = PALETTE[i % len(PALETTE)]
        c.add(f'<line x1="{_f(x)}" y1="{_f(sy(lo))}" x2="{_f(x)}" y2="{_f(sy(hi))}" stroke="#333"/>')
        for v in (lo, hi):
            c.add(f'<line x1="{_f(x - half / 2)}" y1="{_f(sy(v))}" x2="{_f(x + half / 2)}" y2="{_f(sy(v))}" stroke="#333"/>')
        c.add(f'<rect x="{_f(x - half)}" y="{_f(sy(q3))}" width="{_f(2 * half)}" '
              f'height="{_f(max(sy(q1) - sy(q3), 0.5))}" fill="{color}" fill-opacity="0.45" stroke="#333"/>')
        c.add(f'<line x1="{_f(x - half)}" y1="{_f(sy(med))}" x2="{_f(x + half)}" y2="{_f(sy(med))}" stroke="#000" stroke-width="2"/>')
    return c.render()


def _heat_color(t: float) -> str:
    # white -> dark red
    t = min(max(t, 0.0), 1.0)
    r = 255 - int(80 * t)
    g = 255 - int(230 * t)
    b = 255 - int(230 * t)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(values: Sequence[Sequence[Optional[float]]], row_labels: Sequence, col_labels: Sequence,
            title: str, row_title: str, col_title: str, vmin: float = 1.0, vmax: Optional[float] = None) -> str:
    """Cells with ``None`` are drawn grey and labelled n/a."""
    finite = [v for row in values for v in row if v is not None]
    vmax = vmax if vmax is not None else (max(finite) if finite else vmin + 1)
    span = (vmax - vmin) or 1.0
    rows, cols = len(row_labels), len(col_labels)
    cell = min(70.0, 520.0 / max(rows, cols, 1))
    width = int(LEFT + cols * cell + 60)
    height = int(TOP + 20 + rows * cell + BOTTOM)
    c = _Canvas(title, width, height)
    gx, gy = LEFT, TOP + 20
    for i, rl in enumerate(row_labels):
        c.text(gx - 8, gy + cell * (i + 0.5) + 4, rl, anchor="end")
        for j in range(cols):
            v = values[i][j]
            fill = "#cccccc" if v is None else _heat_color((v - vmin) / span)
            x, y = gx + j * cell, gy + i * cell
            c.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(cell)}" height="{_f(cell)}" fill="{fill}" stroke="white"/>')
            ink = "white" if v is not None and (v - vmin) / span > 0.6 else "black"
            c.text(x + cell / 2, y + cell / 2 + 4, "n/a" if v is None else f"{v:.2f}", font_size="11", fill=ink)
    for j, cl in enumerate(col_labels):
        c.text(gx + cell * (j + 0.5), gy + rows * cell + 16, cl)
    c.text(gx + cols * cell / 2, gy + rows * cell + 38, col_title)
    c.text(18, gy + rows * cell / 2, row_title, transform=f"rotate(-90 18 {_f(gy + rows * cell / 2)})")
    return c.render()
