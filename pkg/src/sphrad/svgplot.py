"""Minimal self-contained SVG line figures.

Hand-rolled on purpose: the output is a single valid XML document with no
external references, so figures diff cleanly in version control and need no
plotting dependency. Supports multiple side-by-side panels, continuous and
step curves, axis ticks, and a small legend.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

__all__ = ["Curve", "Panel", "line_figure"]


class Curve:
    def __init__(self, x, y, color: str, label: str, step: bool = False):
        self.x = [float(v) for v in x]
        self.y = [float(v) for v in y]
        if len(self.x) != len(self.y):
            raise ValueError("curve coordinate lists must have equal length")
        self.color = color
        self.label = label
        self.step = step


class Panel:
    def __init__(self, title: str, curves: list[Curve], xlabel: str = "x",
                 ylabel: str = ""):
        if not curves:
            raise ValueError("a panel needs at least one curve")
        self.title = title
        self.curves = curves
        self.xlabel = xlabel
        self.ylabel = ylabel


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _panel_svg(panel: Panel, x0: int, width: int, height: int) -> list[str]:
    pad_l, pad_r, pad_t, pad_b = 52, 14, 30, 40
    plot_w, plot_h = width - pad_l - pad_r, height - pad_t - pad_b
    xs = [v for c in panel.curves for v in c.x]
    ys = [v for c in panel.curves for v in c.y]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    margin = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - margin, yhi + margin

    def sx(v: float) -> float:
        return x0 + pad_l + (v - xlo) / (xhi - xlo) * plot_w if xhi > xlo else x0 + pad_l

    def sy(v: float) -> float:
        return pad_t + plot_h - (v - ylo) / (yhi - ylo) * plot_h

    parts = [f'<rect x="{x0 + pad_l}" y="{pad_t}" width="{plot_w}" height="{plot_h}" '
             f'fill="none" stroke="#444444" stroke-width="1"/>']
    parts.append(f'<text x="{x0 + pad_l + plot_w / 2:.2f}" y="{pad_t - 10}" '
                 f'text-anchor="middle" font-size="13" font-family="sans-serif">'
                 f'{escape(panel.title)}</text>')
    for t in _ticks(xlo, xhi):
        px = sx(t)
        parts.append(f'<line x1="{px:.2f}" y1="{pad_t + plot_h}" x2="{px:.2f}" '
                     f'y2="{pad_t + plot_h + 4}" stroke="#444444" stroke-width="1"/>')
        parts.append(f'<text x="{px:.2f}" y="{pad_t + plot_h + 16}" '
                     f'text-anchor="middle" font-size="10" font-family="sans-serif">'
                     f'{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        py = sy(t)
        parts.append(f'<line x1="{x0 + pad_l - 4}" y1="{py:.2f}" x2="{x0 + pad_l}" '
                     f'y2="{py:.2f}" stroke="#444444" stroke-width="1"/>')
        parts.append(f'<text x="{x0 + pad_l - 7}" y="{py + 3:.2f}" text-anchor="end" '
                     f'font-size="10" font-family="sans-serif">{_fmt(t)}</text>')
    parts.append(f'<text x="{x0 + pad_l + plot_w / 2:.2f}" y="{height - 8}" '
                 f'text-anchor="middle" font-size="11" font-family="sans-serif">'
                 f'{escape(panel.xlabel)}</text>')
    if panel.ylabel:
        cy = pad_t + plot_h / 2
        parts.append(f'<text x="{x0 + 14}" y="{cy:.2f}" text-anchor="middle" '
                     f'font-size="11" font-family="sans-serif" '
                     f'transform="rotate(-90 {x0 + 14} {cy:.2f})">'
                     f'{escape(panel.ylabel)}</text>')

    for curve in panel.curves:
        pts = []
        if curve.step:
            # piecewise-constant: hold each y until the next x
            for i, (cx, cy) in enumerate(zip(curve.x, curve.y)):
                if i > 0:
                    pts.append(f"{sx(cx):.2f},{sy(curve.y[i - 1]):.2f}")
                pts.append(f"{sx(cx):.2f},{sy(cy):.2f}")
        else:
            pts = [f"{sx(cx):.2f},{sy(cy):.2f}" for cx, cy in zip(curve.x, curve.y)]
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{curve.color}" stroke-width="1.5"/>')

    ly = pad_t + 10
    for curve in panel.curves:
        lx = x0 + pad_l + plot_w - 120
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" '
                     f'stroke="{curve.color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 27}" y="{ly + 3}" font-size="10" '
                     f'font-family="sans-serif">{escape(curve.label)}</text>')
        ly += 14
    return parts


def line_figure(panels: list[Panel], width_per_panel: int = 440,
                height: int = 340) -> str:
    """Render panels side by side into one standalone SVG document."""
    if not panels:
        raise ValueError("need at least one panel")
    total_w = width_per_panel * len(panels)
    body: list[str] = []
    for i, panel in enumerate(panels):
        body.extend(_panel_svg(panel, i * width_per_panel, width_per_panel, height))
    content = "\n".join(body)
    return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" '
            f'height="{height}" viewBox="0 0 {total_w} {height}">\n'
            f'<rect width="{total_w}" height="{height}" fill="#ffffff"/>\n'
            f'{content}\n</svg>\n')
