"""Minimal SVG: domain circles and free-boundary polylines."""

from __future__ import annotations

from pathlib import Path

import numpy as np

SIZE = 400
COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def write_svg(path, circles, curves, extent: float) -> None:
    """circles: [(cx, cy, r)], curves: [(label, points (k,2), closed)]."""
    s = SIZE / (2.2 * extent)

    def tx(p):
        return SIZE / 2 + s * p[0], SIZE / 2 - s * p[1]

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
             f'viewBox="0 0 {SIZE} {SIZE}">',
             f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>']
    for cx, cy, r in circles:
        x, y = tx((cx, cy))
        lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(s * r)}" '
                     'fill="none" stroke="black" stroke-width="1"/>')
    for k, (label, pts, closed) in enumerate(curves):
        pts = np.asarray(pts)
        if len(pts) == 0:
            continue
        coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (tx(p) for p in pts))
        tag = "polygon" if closed else "polyline"
        color = COLORS[k % len(COLORS)]
        lines.append(f'<{tag} points="{coords}" fill="none" stroke="{color}" stroke-width="1.5">'
                     f'<title>{label}</title></{tag}>')
        lines.append(f'<text x="8" y="{16 + 14 * k}" font-size="12" fill="{color}">{label}</text>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")
