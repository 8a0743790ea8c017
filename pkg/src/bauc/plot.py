"""Minimal SVG line charts for aggregate tables."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 30, 55
PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#e377c2", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


class PlotError(ValueError):
    pass


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 12))
        v += step
    if ticks[-1] < hi:
        ticks.append(round(ticks[-1] + step, 12))
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def read_series(path, x_column: str, y_column: str, series_column: str) -> dict[str, list[tuple[float, float]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in (x_column, y_column, series_column) if c not in cols]
        if missing:
            raise PlotError(f"{path}: missing column(s) {', '.join(missing)}")
        series: dict[str, list[tuple[float, float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                x = float(row[x_column])
                y = float(row[y_column])
            except ValueError:
                raise PlotError(
                    f"{path}: row {lineno} has a non-numeric {x_column!r} or {y_column!r}"
                ) from None
            series.setdefault(row[series_column], []).append((x, y))
    if not series:
        raise PlotError(f"{path}: no data rows")
    return series


def render_svg(series: dict[str, list[tuple[float, float]]], x_label: str, y_label: str) -> str:
    """One polyline per series (markers at each point), legend on the right."""
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    xt = _nice_ticks(min(xs), max(xs))
    yt = _nice_ticks(min(ys), max(ys))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN_T + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for t in xt:
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN_T + ph}" x2="{x:.2f}" y2="{MARGIN_T + ph + 5}" stroke="#000"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in yt:
        y = py(t)
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{y:.2f}" x2="{MARGIN_L}" y2="{y:.2f}" stroke="#000"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(
        f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(x_label)}</text>'
    )
    out.append(
        f'<text x="16" y="{MARGIN_T + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.2f})">{escape(y_label)}</text>'
    )
    for i, (name, pts) in enumerate(series.items()):
        colour = PALETTE[i % len(PALETTE)]
        pts = sorted(pts)
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        if len(pts) > 1:
            out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{colour}"/>')
        ly = MARGIN_T + 10 + 18 * i
        lx = MARGIN_L + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(path, x_column: str, y_column: str, series_column: str, output) -> None:
    svg = render_svg(read_series(path, x_column, y_column, series_column), x_column, y_column)
    Path(output).write_text(svg, encoding="utf-8", newline="\n")
