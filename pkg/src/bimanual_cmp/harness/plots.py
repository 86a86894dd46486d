"""Minimal SVG line charts, written without any plotting library."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart", "write_run_plots"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#843c39", "#637939", "#7b4173")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def line_chart(t, series: dict, title: str, ylabel: str, width: int = 720, height: int = 300,
               max_points: int = 1500) -> str:
    """SVG text for ``series`` (label -> values) against ``t``."""
    t = np.asarray(t, dtype=float)
    stride = max(1, int(np.ceil(t.size / max_points)))
    ml, mr, mt, mb = 64, 150, 30, 40
    pw, ph = width - ml - mr, height - mt - mb
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    lo = min(float(y.min()) for y in ys) if ys else 0.0
    hi = max(float(y.max()) for y in ys) if ys else 1.0
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    t0, t1 = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0

    def sx(v):
        return ml + (v - t0) / (t1 - t0) * pw

    def sy(v):
        return mt + (hi - v) / (hi - lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{ml}" y="18" font-size="13">{escape(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for v in _ticks(lo, hi):
        y = sy(v)
        out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{y:.1f}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 4}" y="{y + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for v in _ticks(t0, t1):
        x = sx(v)
        out.append(f'<text x="{x:.1f}" y="{mt + ph + 15}" text-anchor="middle">{v:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 6}" text-anchor="middle">t [s]</text>')
    out.append(f'<text x="14" y="{mt + ph / 2}" transform="rotate(-90 14 {mt + ph / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for i, (label, y) in enumerate(zip(series, ys)):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(t[::stride], y[::stride]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = mt + 12 + 14 * i
        out.append(f'<line x1="{ml + pw + 10}" x2="{ml + pw + 28}" y1="{ly - 4}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 32}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_run_plots(out_dir, stem: str, columns, data) -> list:
    """Error/perturbation chart and torque-decomposition chart for one run log."""
    out_dir = Path(out_dir)
    idx = {c: i for i, c in enumerate(columns)}
    t = data[:, idx["t"]]

    def norm(prefix):
        return np.linalg.norm(data[:, [idx[prefix + a] for a in "xyz"]], axis=1)

    paths = []
    p = out_dir / f"{stem}_errors.svg"
    p.write_text(line_chart(t, {"|abs error| [m]": norm("err_abs_"), "|rel error| [m]": norm("err_rel_")},
                            f"{stem}: task position errors", "m"))
    paths.append(p)
    p = out_dir / f"{stem}_perturbation.svg"
    p.write_text(line_chart(t, {"|f| est [N]": data[:, idx["pert_n"]]}, f"{stem}: estimated perturbation", "N"))
    paths.append(p)
    for arm in (1, 2):
        series = {}
        for term in ("rec", "biman", "vft", "ff"):
            cols = [i for c, i in idx.items() if c.startswith(f"tau_{term}{arm}_")]
            series[f"|tau_{term}|"] = np.linalg.norm(data[:, cols], axis=1)
        p = out_dir / f"{stem}_torques_arm{arm}.svg"
        p.write_text(line_chart(t, series, f"{stem}: feed-forward terms, arm {arm}", "Nm"))
        paths.append(p)
    return paths
