"""Minimal SVG rendering for scatter and box plots (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 480, 420
ML, MR, MT, MB = 64, 20, 36, 56

COLORS = {"low": "#d62728", "high": "#1f77b4", "point": "#1f77b4",
          "kode": "#2ca02c", "idea": "#1f77b4", "kalman_ucb": "#ff7f0e"}


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Axis:
    def __init__(self, lo, hi, a, b, log=False):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi, self.a, self.b, self.log = lo, hi, a, b, log

    def __call__(self, v):
        if self.log:
            v = math.log10(v)
        return self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)

    def ticks(self):
        if self.log:
            return [10.0 ** e for e in range(math.ceil(self.lo), math.floor(self.hi) + 1)]
        step = _nice_step((self.hi - self.lo) / 5)
        start = math.ceil(self.lo / step) * step
        out, v = [], start
        while v <= self.hi + 1e-12 * abs(step):
            out.append(round(v, 12))
            v += step
        return out


def _nice_step(raw):
    e = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if m * e >= raw:
            return m * e
    return 10 * e


def _tick_label(v, log):
    if log:
        return f"1e{int(round(math.log10(v)))}"
    return f"{v:g}"


def _frame(title, xlabel, ylabel, xa, ya, x0=0, y0=0):
    parts = [
        f'<rect x="{x0 + ML}" y="{y0 + MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="#000"/>',
        f'<text x="{_f(x0 + W / 2)}" y="{y0 + 22}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{_f(x0 + W / 2)}" y="{y0 + H - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="{x0 + 16}" y="{_f(y0 + H / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 {x0 + 16} {_f(y0 + H / 2)})">{escape(ylabel)}</text>',
    ]
    if xa is not None:
        for v in xa.ticks():
            x = xa(v)
            parts.append(f'<line x1="{_f(x)}" y1="{y0 + H - MB}" x2="{_f(x)}" y2="{y0 + H - MB + 4}" stroke="#000"/>')
            parts.append(f'<text x="{_f(x)}" y="{y0 + H - MB + 16}" text-anchor="middle" font-size="10">'
                         f'{_tick_label(v, xa.log)}</text>')
    for v in ya.ticks():
        y = ya(v)
        parts.append(f'<line x1="{x0 + ML - 4}" y1="{_f(y)}" x2="{x0 + ML}" y2="{_f(y)}" stroke="#000"/>')
        parts.append(f'<text x="{x0 + ML - 6}" y="{_f(y + 3)}" text-anchor="end" font-size="10">'
                     f'{_tick_label(v, ya.log)}</text>')
    return parts


def _document(width, height, parts):
    head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n')
    body = "\n".join(parts)
    return head + f'<rect width="{width}" height="{height}" fill="#fff"/>\n' + body + "\n</svg>\n"


def scatter_svg(series: dict[str, list[tuple[float, float]]], title: str, xlabel: str, ylabel: str,
                log: bool = False, diagonal: bool = True) -> str:
    """Scatter plot of one or more named point series.

    With ``log=True`` points with a nonpositive coordinate cannot be drawn;
    they are dropped and their count is printed on the figure.
    """
    dropped = 0
    kept = {}
    for name, pts in series.items():
        good = [(x, y) for x, y in pts if math.isfinite(x) and math.isfinite(y) and (not log or (x > 0 and y > 0))]
        dropped += len(pts) - len(good)
        kept[name] = good
    allp = [p for pts in kept.values() for p in pts]
    if allp:
        lo = min(min(x for x, _ in allp), min(y for _, y in allp))
        hi = max(max(x for x, _ in allp), max(y for _, y in allp))
    else:
        lo, hi = (0.1, 10.0) if log else (0.0, 1.0)
    if log:
        lo, hi = 10 ** math.floor(math.log10(lo)), 10 ** math.ceil(math.log10(hi))
    else:
        pad = 0.05 * (hi - lo) if hi > lo else 0.5
        lo, hi = lo - pad, hi + pad
    xa = _Axis(lo, hi, ML, W - MR, log)
    ya = _Axis(lo, hi, H - MB, MT, log)
    parts = _frame(title, xlabel, ylabel, xa, ya)
    if diagonal:
        parts.append(f'<line x1="{_f(xa(lo))}" y1="{_f(ya(lo))}" x2="{_f(xa(hi))}" y2="{_f(ya(hi))}" '
                     f'stroke="#000" stroke-dasharray="4 3"/>')
    for idx, (name, pts) in enumerate(kept.items()):
        color = COLORS.get(name, COLORS["point"])
        for x, y in pts:
            parts.append(f'<circle cx="{_f(xa(x))}" cy="{_f(ya(y))}" r="2.5" fill="{color}" fill-opacity="0.6"/>')
        if len(kept) > 1:
            ly = MT + 14 + 14 * idx
            parts.append(f'<circle cx="{ML + 10}" cy="{ly - 4}" r="3" fill="{color}"/>')
            parts.append(f'<text x="{ML + 18}" y="{ly}" font-size="10">{escape(name)}</text>')
    if dropped:
        parts.append(f'<text x="{W - MR - 4}" y="{H - MB - 6}" text-anchor="end" font-size="10">'
                     f'{dropped} nonpositive or undefined point(s) omitted</text>')
    return _document(W, H, parts)


def boxplot_svg(panels: list[tuple[str, dict]], ylabel: str = "normalized regret") -> str:
    """Row of box-plot panels. Each panel is ``(title, {label: CellStats})``."""
    parts = []
    vals = [v for _, boxes in panels for c in boxes.values() if c.count
            for v in (c.whisker_low, c.whisker_high, c.q1, c.q3)]
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    for p, (title, boxes) in enumerate(panels):
        x0 = p * W
        ya = _Axis(lo - pad, hi + pad, H - MB, MT)
        parts += _frame(title, "", ylabel if p == 0 else "", None, ya, x0=x0)
        n = max(1, len(boxes))
        slot = (W - ML - MR) / n
        for b, (label, c) in enumerate(boxes.items()):
            cx = x0 + ML + slot * (b + 0.5)
            half = slot * 0.3
            parts.append(f'<text x="{_f(cx)}" y="{H - MB + 16}" text-anchor="middle" font-size="10">{escape(label)}</text>')
            if not c.count:
                parts.append(f'<text x="{_f(cx)}" y="{_f(H / 2)}" text-anchor="middle" font-size="10">missing</text>')
                continue
            color = COLORS.get(label, COLORS["point"])
            parts.append(f'<line x1="{_f(cx)}" y1="{_f(ya(c.whisker_low))}" x2="{_f(cx)}" y2="{_f(ya(c.whisker_high))}" stroke="#000"/>')
            for w in (c.whisker_low, c.whisker_high):
                parts.append(f'<line x1="{_f(cx - half / 2)}" y1="{_f(ya(w))}" x2="{_f(cx + half / 2)}" y2="{_f(ya(w))}" stroke="#000"/>')
            top, bot = ya(c.q3), ya(c.q1)
            parts.append(f'<rect x="{_f(cx - half)}" y="{_f(top)}" width="{_f(2 * half)}" height="{_f(bot - top)}" '
                         f'fill="{color}" fill-opacity="0.5" stroke="#000"/>')
            parts.append(f'<line x1="{_f(cx - half)}" y1="{_f(ya(c.median))}" x2="{_f(cx + half)}" y2="{_f(ya(c.median))}" '
                         f'stroke="#000" stroke-width="2"/>')
    return _document(W * max(1, len(panels)), H, parts)
