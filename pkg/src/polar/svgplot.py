"""Dependency-free static SVG summaries.

Deliberately minimal: fixed-size canvases, deterministic coordinates
(fixed decimal formatting, seeded jitter), no interaction.  Diff-able in
tests.
"""

from __future__ import annotations

import math

import numpy as np

from .rng import rng_from_key

WIDTH = 640
HEIGHT = 400
MARGIN = 60
GROUP_COLORS = ["#4878a8", "#c44e52", "#55a868", "#8172b2", "#ccb974", "#64b5cd"]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _scale(lo: float, hi: float, span: float):
    if hi <= lo:
        hi = lo + 1.0
    rng = hi - lo

    def f(v: float) -> float:
        return MARGIN + (v - lo) / rng * span

    return f


def _quartiles(vals: np.ndarray) -> tuple[float, float, float]:
    q1, q2, q3 = np.percentile(vals, [25, 50, 75])
    return float(q1), float(q2), float(q3)


def svg_box_swarm(groups: dict[str, np.ndarray], title: str, seed: int = 0) -> str:
    """Box-and-points panel: one box per group, jittered member points."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
    ]
    finite = [v[np.isfinite(v)] for v in groups.values()]
    allv = np.concatenate(finite) if finite else np.zeros(1)
    if allv.size == 0:
        allv = np.zeros(1)
    sy = _scale(float(allv.min()), float(allv.max()), HEIGHT - 2 * MARGIN)

    def ypix(v: float) -> float:
        # svg y grows downward
        return HEIGHT - sy(v) + 0.0

    n = max(1, len(groups))
    slot = (WIDTH - 2 * MARGIN) / n
    for gi, (name, vals) in enumerate(groups.items()):
        vals = np.asarray(vals, dtype=np.float64)
        vals = vals[np.isfinite(vals)]
        cx = MARGIN + slot * (gi + 0.5)
        color = GROUP_COLORS[gi % len(GROUP_COLORS)]
        parts.append(
            f'<text x="{_fmt(cx)}" y="{HEIGHT - 20}" text-anchor="middle" '
            f'font-size="12">{name} (n={vals.size})</text>'
        )
        if vals.size == 0:
            continue
        q1, q2, q3 = _quartiles(vals)
        lo_whisk = float(vals.min())
        hi_whisk = float(vals.max())
        half = min(40.0, slot * 0.25)
        parts.append(
            f'<rect x="{_fmt(cx - half)}" y="{_fmt(ypix(q3))}" width="{_fmt(2 * half)}" '
            f'height="{_fmt(max(0.5, ypix(q1) - ypix(q3)))}" fill="none" stroke="{color}"/>'
        )
        for q, wfrac in ((q2, 1.0), (lo_whisk, 0.5), (hi_whisk, 0.5)):
            parts.append(
                f'<line x1="{_fmt(cx - half * wfrac)}" y1="{_fmt(ypix(q))}" '
                f'x2="{_fmt(cx + half * wfrac)}" y2="{_fmt(ypix(q))}" stroke="{color}"/>'
            )
        parts.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(ypix(hi_whisk))}" x2="{_fmt(cx)}" '
            f'y2="{_fmt(ypix(q3))}" stroke="{color}"/>'
        )
        parts.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(ypix(q1))}" x2="{_fmt(cx)}" '
            f'y2="{_fmt(ypix(lo_whisk))}" stroke="{color}"/>'
        )
        jit = rng_from_key(seed, "swarm", title, name).uniform(-half * 0.8, half * 0.8, vals.size)
        for v, j in zip(vals, jit):
            parts.append(
                f'<circle cx="{_fmt(cx + j)}" cy="{_fmt(ypix(float(v)))}" r="2" '
                f'fill="{color}" fill-opacity="0.55"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_scatter(points, title: str) -> str:
    """Category-colored scatter; ``points`` yields (x, y, category)."""
    pts = [(float(x), float(y), str(c)) for x, y, c in points if math.isfinite(x) and math.isfinite(y)]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
    ]
    if pts:
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        sx = _scale(float(xs.min()), float(xs.max()), WIDTH - 2 * MARGIN)
        sy = _scale(float(ys.min()), float(ys.max()), HEIGHT - 2 * MARGIN)
        cats = sorted({p[2] for p in pts})
        color_of = {c: GROUP_COLORS[i % len(GROUP_COLORS)] for i, c in enumerate(cats)}
        for i, c in enumerate(cats):
            parts.append(
                f'<text x="{MARGIN}" y="{40 + 16 * i}" font-size="12" '
                f'fill="{color_of[c]}">{c}</text>'
            )
        for x, y, c in pts:
            parts.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(HEIGHT - sy(y))}" r="2.5" '
                f'fill="{color_of[c]}" fill-opacity="0.6"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
