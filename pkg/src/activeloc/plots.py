"""Self-contained SVG line charts: mean curve, min/max band and an optional dashed bound."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H = 720, 420
ML, MR, MT, MB = 70, 20, 40, 50


def _ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, count)


def line_chart(
    path,
    x,
    mean,
    lo,
    hi,
    *,
    bound=None,
    title: str = "",
    log_y: bool = False,
) -> None:
    """Write an SVG chart of ``mean`` with a shaded ``[lo, hi]`` envelope."""
    x = np.asarray(x, dtype=float)
    series = [np.asarray(v, dtype=float) for v in (mean, lo, hi)]
    if bound is not None:
        series.append(np.asarray(bound, dtype=float))
    tf = (lambda v: np.log10(np.maximum(v, 1e-300))) if log_y else (lambda v: v)
    vals = np.concatenate([tf(s[np.isfinite(s)]) for s in series])
    y0, y1 = float(vals.min()), float(vals.max())
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    x0, x1 = float(x.min()), float(max(x.max(), x.min() + 1))

    def px(v):
        return ML + (v - x0) / (x1 - x0) * (W - ML - MR)

    def py(v):
        return H - MB - (tf(v) - y0) / (y1 - y0) * (H - MT - MB)

    def pts(ys):
        return " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, ys) if np.isfinite(b))

    band = pts(series[2]) + " " + " ".join(
        f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[::-1], series[1][::-1]) if np.isfinite(b)
    )
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<polygon points="{band}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>',
        f'<polyline points="{pts(series[0])}" fill="none" stroke="#1f77b4" stroke-width="1.6"/>',
    ]
    if bound is not None:
        out.append(
            f'<polyline points="{pts(series[3])}" fill="none" stroke="#d62728" stroke-width="1.4" stroke-dasharray="6,4"/>'
        )
    out.append(
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="black"/>'
    )
    for t in _ticks(x0, x1):
        out.append(
            f'<text x="{px(t):.1f}" y="{H - MB + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{t:.0f}</text>'
        )
    for t in _ticks(y0, y1):
        label = f"{10 ** t:.3g}" if log_y else f"{t:.3g}"
        yp = H - MB - (t - y0) / (y1 - y0) * (H - MT - MB)
        out.append(
            f'<text x="{ML - 6}" y="{yp + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">{label}</text>'
        )
    out.append(
        f'<text x="{(ML + W - MR) / 2}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">k</text>'
    )
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


__all__ = ["line_chart"]
