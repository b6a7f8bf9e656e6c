"""Minimal standalone SVG line charts. Textual, diffable, and
byte-deterministic for a given input (fixed canvas, palette, and float
formatting; no timestamps)."""

from __future__ import annotations

import math
from pathlib import Path

WIDTH, HEIGHT = 840, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 30, 46, 56
PALETTE = ("#1f6fb4", "#d43d2a", "#2e8b57", "#8a2be2", "#b8860b", "#444444")


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 10))
        v += step
    return out


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _num(x: float) -> str:
    return f"{x:.6g}"


def write_line_chart(path: str | Path, series: list[tuple[str, list[float],
                                                          list[float]]],
                     title: str, xlabel: str, ylabel: str,
                     annotations: list[str] | None = None) -> None:
    """series: (name, xs, ys) triples; empty series produce empty axes."""
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if xs_all:
        x_lo, x_hi = min(xs_all), max(xs_all)
        y_lo, y_hi = min(ys_all), max(ys_all)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
        pad = 0.05 * (y_hi - y_lo)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]
    parts.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#333" stroke-width="1"/>')
    for tx in _ticks(x_lo, x_hi):
        if not x_lo <= tx <= x_hi:
            continue
        parts.append(f'<line x1="{_fmt(px(tx))}" y1="{MARGIN_T + plot_h}" '
                     f'x2="{_fmt(px(tx))}" y2="{MARGIN_T + plot_h + 5}" '
                     f'stroke="#333"/>')
        parts.append(f'<text x="{_fmt(px(tx))}" y="{MARGIN_T + plot_h + 20}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{_num(tx)}</text>')
    for ty in _ticks(y_lo, y_hi):
        if not y_lo <= ty <= y_hi:
            continue
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{_fmt(py(ty))}" '
                     f'x2="{MARGIN_L}" y2="{_fmt(py(ty))}" stroke="#333"/>')
        parts.append(f'<text x="{MARGIN_L - 9}" y="{_fmt(py(ty) + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{_num(ty)}</text>')
    parts.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 14}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13">{xlabel}</text>')
    parts.append(f'<text x="20" y="{HEIGHT / 2:.0f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13" '
                 f'transform="rotate(-90 20 {HEIGHT / 2:.0f})">{ylabel}</text>')

    dashes = ("none", "6,4", "2,3", "8,3,2,3")
    for i, (name, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        dash = dashes[i % len(dashes)]
        if xs:
            pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}"
                           for x, y in zip(xs, ys))
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.6" '
                         f'stroke-dasharray="{dash}"/>')
        ly = MARGIN_T + 16 + 16 * i
        parts.append(f'<line x1="{MARGIN_L + 10}" y1="{ly - 4}" '
                     f'x2="{MARGIN_L + 38}" y2="{ly - 4}" stroke="{color}" '
                     f'stroke-width="1.6" stroke-dasharray="{dash}"/>')
        parts.append(f'<text x="{MARGIN_L + 44}" y="{ly}" '
                     f'font-family="sans-serif" font-size="12">{name}</text>')
    for i, note in enumerate(annotations or []):
        parts.append(f'<text x="{WIDTH - MARGIN_R - 6}" '
                     f'y="{MARGIN_T + 16 + 14 * i}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="#555">{note}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
