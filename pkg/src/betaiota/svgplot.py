"""Minimal SVG polyline plots (no plotting stack dependency)."""

from __future__ import annotations

import math

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 20, 20, 50


def _transform(values, lo, hi, out_lo, out_hi, log):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
        values = [math.log10(v) for v in values]
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def _ticks(lo, hi, log):
    if log:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0 ** e for e in range(lo_e, hi_e + 1)]
    step = 10 ** math.floor(math.log10(max(hi - lo, 1e-300)))
    if (hi - lo) / step > 5:
        step *= 2
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * step:
        out.append(v)
        v += step
    return out


def polyline_plot(series, path, xlabel="x", ylabel="y", loglog=False):
    """Write a plot of `series` = {label: (xs, ys)} to an SVG file."""
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if loglog:
        xs_all = [x for x in xs_all if x > 0]
        ys_all = [y for y in ys_all if y > 0]
    if not xs_all or not ys_all:
        xs_all, ys_all = [1.0], [1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_lo == x_hi:
        x_hi = x_lo + 1 if not loglog else x_lo * 10
    if y_lo == y_hi:
        y_hi = y_lo + 1 if not loglog else y_lo * 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'font-family="sans-serif" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
             f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>']
    for tx in _ticks(x_lo, x_hi, loglog):
        if tx < x_lo or tx > x_hi:
            continue
        px = _transform([tx], x_lo, x_hi, _ML, _W - _MR, loglog)[0]
        parts.append(f'<line x1="{px:.1f}" y1="{_H - _MB}" x2="{px:.1f}" '
                     f'y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{_H - _MB + 18}" '
                     f'text-anchor="middle">{tx:g}</text>')
    for ty in _ticks(y_lo, y_hi, loglog):
        if ty < y_lo or ty > y_hi:
            continue
        py = _transform([ty], y_lo, y_hi, _H - _MB, _MT, loglog)[0]
        parts.append(f'<line x1="{_ML - 5}" y1="{py:.1f}" x2="{_ML}" '
                     f'y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{py + 4:.1f}" '
                     f'text-anchor="end">{ty:g}</text>')
    parts.append(f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 10}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="15" y="{(_MT + _H - _MB) / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 15 {(_MT + _H - _MB) / 2})">{ylabel}</text>')
    for i, (label, (xs, ys)) in enumerate(series.items()):
        pts = [(x, y) for x, y in zip(xs, ys)
               if not loglog or (x > 0 and y > 0)]
        if not pts:
            continue
        px = _transform([p[0] for p in pts], x_lo, x_hi, _ML, _W - _MR, loglog)
        py = _transform([p[1] for p in pts], y_lo, y_hi, _H - _MB, _MT, loglog)
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(px, py))
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MR - 5}" y="{_MT + 16 * (i + 1)}" '
                     f'text-anchor="end" fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
