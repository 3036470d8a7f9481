"""Minimal static SVG line plots written directly, no renderer involved.

Just enough for the experiment artifacts: polyline curves over linear or
log-scaled y, axis ticks, and a legend. Output is deterministic byte for
byte for identical inputs, which keeps re-run comparisons trivial.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)

# plot frame margins in pixels: left, right, top, bottom
_ML, _MR, _MT, _MB = 74, 22, 40, 48


def _tick_label(v: float) -> str:
    if v == 0.0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def svg_line_plot(
    path,
    curves: Sequence[Tuple[str, np.ndarray, np.ndarray]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logy: bool = False,
    width: int = 640,
    height: int = 440,
) -> None:
    """Write labelled (x, y) polylines as a standalone SVG file.

    With ``logy`` the y axis is log10-scaled and nonpositive samples are
    dropped from the drawing (a curve that loses every point is skipped).
    Raises if nothing remains to draw.
    """
    cleaned = []
    for label, x, y in curves:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if logy:
            keep &= y > 0.0
        if np.any(keep):
            cleaned.append((label, x[keep], y[keep]))
    if not cleaned:
        raise ValueError("no drawable points in any curve")

    xmin = min(float(np.min(x)) for _, x, _ in cleaned)
    xmax = max(float(np.max(x)) for _, x, _ in cleaned)
    ys = [np.log10(y) if logy else y for _, _, y in cleaned]
    ymin = min(float(np.min(y)) for y in ys)
    ymax = max(float(np.max(y)) for y in ys)
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0

    px_w = width - _ML - _MR
    px_h = height - _MT - _MB

    def sx(v: float) -> float:
        return _ML + (v - xmin) / (xmax - xmin) * px_w

    def sy(v: float) -> float:
        return _MT + (ymax - v) / (ymax - ymin) * px_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]

    # frame
    parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{px_w}" height="{px_h}" '
        'fill="none" stroke="black" stroke-width="1"/>'
    )

    # x ticks, 6 evenly spaced
    for v in np.linspace(xmin, xmax, 6):
        X = sx(float(v))
        parts.append(
            f'<line x1="{X:.2f}" y1="{_MT + px_h}" x2="{X:.2f}" '
            f'y2="{_MT + px_h + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{X:.2f}" y="{_MT + px_h + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_tick_label(float(v))}</text>'
        )

    # y ticks: decades when log-scaled, else 6 linear stops
    if logy:
        lo, hi = math.floor(ymin), math.ceil(ymax)
        step = max(1, (hi - lo) // 8)
        tick_vals = [float(e) for e in range(lo, hi + 1, step)]
        tick_txt = [f"1e{int(e)}" for e in tick_vals]
    else:
        tick_vals = [float(v) for v in np.linspace(ymin, ymax, 6)]
        tick_txt = [_tick_label(v) for v in tick_vals]
    for v, txt in zip(tick_vals, tick_txt):
        if not ymin <= v <= ymax:
            continue
        Y = sy(v)
        parts.append(
            f'<line x1="{_ML - 5}" y1="{Y:.2f}" x2="{_ML}" y2="{Y:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{Y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{txt}</text>'
        )

    parts.append(
        f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {height / 2:.1f})">{ylabel}</text>'
    )

    for i, (label, x, y) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        yy = np.log10(y) if logy else y
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}" for a, b in zip(x, yy))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = _MT + 16 + 16 * i
        parts.append(
            f'<line x1="{width - _MR - 130}" y1="{ly - 4}" x2="{width - _MR - 108}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{width - _MR - 102}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )

    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
