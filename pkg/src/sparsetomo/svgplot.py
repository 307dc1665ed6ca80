"""Minimal deterministic SVG plotting for log-log decay curves.

No plotting dependency: the experiment figures are simple enough (a handful
of polylines, one shaded band, decade ticks) that emitting the SVG directly
keeps the output byte-reproducible across environments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

_DASH = {"solid": None, "dashed": "8 5", "dotted": "2 4"}


@dataclass(frozen=True)
class Series:
    """One curve: points, optional shaded band, line style."""

    label: str
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    band_lo: np.ndarray | None = field(default=None, repr=False)
    band_hi: np.ndarray | None = field(default=None, repr=False)
    style: str = "solid"
    color: str | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).ravel()
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if x.size != y.size or x.size == 0:
            raise ValueError("x and y must be equal-length and nonempty")
        if np.any(~np.isfinite(x)) or np.any(x <= 0) or np.any(~np.isfinite(y)) or np.any(y <= 0):
            raise ValueError("log-log series needs finite positive data")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        for name in ("band_lo", "band_hi"):
            b = getattr(self, name)
            if b is not None:
                b = np.asarray(b, dtype=np.float64).ravel()
                if b.size != x.size:
                    raise ValueError(f"{name} length mismatch")
                object.__setattr__(self, name, b)
        if (self.band_lo is None) != (self.band_hi is None):
            raise ValueError("band_lo and band_hi come together")
        if self.style not in _DASH:
            raise ValueError(f"style must be one of {sorted(_DASH)}, got {self.style!r}")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _decades(lo: float, hi: float):
    return range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1)


def loglog_svg(series, title="", xlabel="", ylabel="",
               width: int = 720, height: int = 540) -> str:
    """Render curves on log-log axes; returns the SVG document as a string."""
    series = list(series)
    if not series:
        raise ValueError("nothing to plot")

    xs = np.concatenate([s.x for s in series])
    ys = [s.y for s in series]
    floor = min(float(s.y.min()) for s in series) * 1e-3
    for s in series:
        if s.band_hi is not None:
            ys.append(np.maximum(s.band_hi, floor))
            ys.append(np.maximum(s.band_lo, floor))
    ys = np.concatenate(ys)

    lx0, lx1 = math.log10(xs.min()), math.log10(xs.max())
    ly0, ly1 = math.log10(ys.min()), math.log10(ys.max())
    if lx1 - lx0 < 1e-9:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5
    if ly1 - ly0 < 1e-9:
        ly0, ly1 = ly0 - 0.5, ly1 + 0.5
    pad_x, pad_y = 0.04 * (lx1 - lx0), 0.06 * (ly1 - ly0)
    lx0, lx1 = lx0 - pad_x, lx1 + pad_x
    ly0, ly1 = ly0 - pad_y, ly1 + pad_y

    ml, mr, mt, mb = 72, 24, 40, 52
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (math.log10(x) - lx0) / (lx1 - lx0) * pw

    def py(y):
        return mt + (ly1 - math.log10(max(y, 10.0 ** ly0))) / (ly1 - ly0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        '<g font-family="Helvetica,Arial,sans-serif" font-size="12" fill="#222">',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
                   f'font-size="15">{title}</text>')

    # gridlines and tick labels at decades
    for k in _decades(lx0, lx1):
        gx = _fmt(ml + (k - lx0) / (lx1 - lx0) * pw)
        out.append(f'<line x1="{gx}" y1="{mt}" x2="{gx}" y2="{mt + ph}" '
                   f'stroke="#ddd" stroke-width="1"/>')
        out.append(f'<text x="{gx}" y="{mt + ph + 18}" text-anchor="middle">1e{k}</text>')
    for k in _decades(ly0, ly1):
        gy = _fmt(mt + (ly1 - k) / (ly1 - ly0) * ph)
        out.append(f'<line x1="{ml}" y1="{gy}" x2="{ml + pw}" y2="{gy}" '
                   f'stroke="#ddd" stroke-width="1"/>')
        out.append(f'<text x="{ml - 8}" y="{gy}" text-anchor="end" '
                   f'dominant-baseline="middle">1e{k}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="#444" stroke-width="1"/>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" '
                   f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="18" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {mt + ph / 2:.1f})">{ylabel}</text>')

    # bands first so every line draws on top of every band
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        if s.band_lo is not None:
            fwd = [f"{_fmt(px(x))},{_fmt(py(max(h, floor)))}"
                   for x, h in zip(s.x, s.band_hi)]
            bwd = [f"{_fmt(px(x))},{_fmt(py(max(l, floor)))}"
                   for x, l in zip(s.x[::-1], s.band_lo[::-1])]
            out.append(f'<polygon points="{" ".join(fwd + bwd)}" fill="{color}" '
                       f'fill-opacity="0.15" stroke="none"/>')
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(s.x, s.y))
        dash = _DASH[s.style]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.8"{dash_attr}/>')
        if s.style == "solid":
            for x, y in zip(s.x, s.y):
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.6" '
                           f'fill="{color}"/>')

    # legend
    lx, ly = ml + pw - 190, mt + 10
    out.append(f'<rect x="{lx}" y="{ly}" width="182" height="{18 * len(series) + 10}" '
               f'fill="white" fill-opacity="0.85" stroke="#999" stroke-width="0.5"/>')
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        yy = ly + 14 + 18 * i
        dash = _DASH[s.style]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{lx + 8}" y1="{yy}" x2="{lx + 36}" y2="{yy}" '
                   f'stroke="{color}" stroke-width="1.8"{dash_attr}/>')
        out.append(f'<text x="{lx + 42}" y="{yy + 4}">{s.label}</text>')

    out.append("</g></svg>")
    return "\n".join(out) + "\n"


def save_svg(path, svg_text: str):
    with open(path, "w") as fh:
        fh.write(svg_text)


def monomial_series(x, c: float, beta: float, label: str,
                    style: str = "dashed", color: str | None = None) -> Series:
    """The curve c * x^beta sampled at the data's x grid."""
    x = np.asarray(x, dtype=np.float64)
    return Series(label, x, c * x ** beta, style=style, color=color)


def anchored_slope_series(x, y0: float, beta: float, label: str,
                          style: str = "dotted", color: str | None = None) -> Series:
    """Reference slope through the first data point: y0 * (x/x[0])^beta."""
    x = np.asarray(x, dtype=np.float64)
    return Series(label, x, y0 * (x / x[0]) ** beta, style=style, color=color)
