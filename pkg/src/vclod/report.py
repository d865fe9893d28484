"""Static SVG figure of fitted psychometric functions, one panel per condition."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import TOOL_NAME, __version__
from .psychofit import PsychometricFit, ResponseTable, psychometric, threshold

PANEL_W, PANEL_H = 360, 280
MARGIN = dict(left=56, right=16, top=36, bottom=48)
Y_RANGE = (0.4, 1.0)
COLORS = {"slow": "#1f6fb4", "fast": "#d9541e"}
FALLBACK_COLORS = ("#2a9d4b", "#7d3cb5", "#8c6d1f")


def _f(x: float) -> str:
    return f"{x:.2f}"


class Panel:
    """Maps data coordinates into one panel's pixel box."""

    def __init__(self, x0: float, y0: float, xlim, ylim=Y_RANGE):
        self.x0, self.y0 = x0, y0
        self.xlim, self.ylim = xlim, ylim
        self.w = PANEL_W - MARGIN["left"] - MARGIN["right"]
        self.h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
        self.left = x0 + MARGIN["left"]
        self.top = y0 + MARGIN["top"]

    def px(self, x):
        lo, hi = self.xlim
        return self.left + (np.asarray(x, float) - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.top + (1.0 - (np.asarray(y, float) - lo) / (hi - lo)) * self.h


def _polyline(xs, ys, stroke, width=1.0, opacity=1.0, dash=None) -> str:
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}" stroke-opacity="{opacity}"{extra}/>')


def _text(x, y, s, size=11, anchor="middle", extra="") -> str:
    return (f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" text-anchor="{anchor}"'
            f'{extra}>{escape(s)}</text>')


def _ticks(lo: float, hi: float, step: float) -> list[float]:
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + 1e-9, step)]


def _axes(p: Panel, title: str) -> list[str]:
    out = [f'<rect x="{_f(p.left)}" y="{_f(p.top)}" width="{_f(p.w)}" height="{_f(p.h)}" '
           'fill="none" stroke="#444"/>']
    for v in _ticks(*p.xlim, 10.0):
        x = float(p.px(v))
        out.append(f'<line x1="{_f(x)}" y1="{_f(p.top + p.h)}" x2="{_f(x)}" '
                   f'y2="{_f(p.top + p.h + 4)}" stroke="#444"/>')
        out.append(_text(x, p.top + p.h + 16, f"{v:g}", 10))
    for v in _ticks(*p.ylim, 0.1):
        y = float(p.py(v))
        out.append(f'<line x1="{_f(p.left - 4)}" y1="{_f(y)}" x2="{_f(p.left)}" y2="{_f(y)}" '
                   'stroke="#444"/>')
        out.append(_text(p.left - 7, y + 3.5, f"{v:.1f}", 10, "end"))
    out.append(_text(p.left + p.w / 2, p.top + p.h + 34, "aggressiveness (% triangles removed)"))
    out.append(_text(p.x0 + 14, p.top + p.h / 2, "proportion correct", 11, "middle",
                     f' transform="rotate(-90 {_f(p.x0 + 14)} {_f(p.top + p.h / 2)})"'))
    out.append(_text(p.left + p.w / 2, p.y0 + 22, title, 13, "middle", ' font-weight="bold"'))
    # chance and criterion reference lines
    for level, dash in ((0.5, "2,3"), (0.75, "5,4")):
        y = float(p.py(level))
        out.append(f'<line x1="{_f(p.left)}" y1="{_f(y)}" x2="{_f(p.left + p.w)}" y2="{_f(y)}" '
                   f'stroke="#999" stroke-dasharray="{dash}"/>')
    return out


def _pooled(tables: list[ResponseTable]):
    """Per level: total correct / total trials across the given tables."""
    n: dict[float, int] = {}
    k: dict[float, int] = {}
    for t in tables:
        for a, ni, ki in t.rows():
            n[a] = n.get(a, 0) + ni
            k[a] = k.get(a, 0) + ki
    levels = [a for a in sorted(n) if n[a] > 0]
    return np.array(levels), np.array([k[a] / n[a] for a in levels])


def render_svg(fits: list[PsychometricFit], tables: list[ResponseTable],
               p: float = 0.75, seed=None) -> str:
    """One panel per condition.

    Thin lines are each participant's converged fit, dots the pooled
    proportion correct at each tested level, the thick line the function at
    the mean fitted parameters, and the marker its threshold at `p`.
    """
    conditions = list(dict.fromkeys([f.condition for f in fits] + [t.condition for t in tables]))
    if not conditions:
        raise ValueError("nothing to plot: no fits or tables")
    all_levels = [a for t in tables for a in t.levels.tolist()]
    all_mu = [f.mu for f in fits if f.converged]
    lo = min(all_levels + all_mu) if (all_levels or all_mu) else 0.0
    hi = max(all_levels + all_mu) if (all_levels or all_mu) else 100.0
    xlim = (float(np.floor((lo - 10.0) / 10.0) * 10.0), float(np.ceil((hi + 5.0) / 10.0) * 10.0))
    xlim = (max(xlim[0], 0.0), min(xlim[1], 100.0)) if xlim[1] - xlim[0] > 20 else xlim

    width, height = PANEL_W * len(conditions), PANEL_H + 24
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
            f"<!-- {TOOL_NAME} {__version__} seed={seed} -->",
            f'<rect width="{width}" height="{height}" fill="white"/>']
    xs = np.linspace(*xlim, 121)
    for i, cond in enumerate(conditions):
        color = COLORS.get(cond, FALLBACK_COLORS[i % len(FALLBACK_COLORS)])
        panel = Panel(i * PANEL_W, 0.0, xlim)
        cfits = [f for f in fits if f.condition == cond and f.converged]
        body.append(f'<g id="panel-{escape(cond)}">')
        body += _axes(panel, f"{cond} (n={len(cfits)})")
        body.append(f'<clipPath id="clip-{i}"><rect x="{_f(panel.left)}" y="{_f(panel.top)}" '
                    f'width="{_f(panel.w)}" height="{_f(panel.h)}"/></clipPath>')
        body.append(f'<g clip-path="url(#clip-{i})">')
        for f in cfits:
            ys = np.clip(psychometric(xs, f.mu, f.sigma), *Y_RANGE)
            body.append(_polyline(panel.px(xs), panel.py(ys), color, 0.8, 0.35))
        if cfits:
            mu = float(np.mean([f.mu for f in cfits]))
            sigma = float(np.mean([f.sigma for f in cfits]))
            ys = np.clip(psychometric(xs, mu, sigma), *Y_RANGE)
            body.append(_polyline(panel.px(xs), panel.py(ys), color, 2.4))
        body.append("</g>")
        ctables = [t for t in tables if t.condition == cond]
        if ctables:
            levels, props = _pooled(ctables)
            for a, pr in zip(levels, props):
                body.append(f'<circle cx="{_f(panel.px(a))}" cy="{_f(panel.py(pr))}" r="4" '
                            f'fill="{color}" stroke="white"/>')
        if cfits:
            group = PsychometricFit(mu, sigma, 0.0, True, 0, cond)
            thr = threshold(group, p)
            x, y = float(panel.px(thr)), float(panel.py(p))
            body.append(f'<line x1="{_f(x)}" y1="{_f(y)}" x2="{_f(x)}" '
                        f'y2="{_f(panel.top + panel.h)}" stroke="{color}" stroke-dasharray="3,2"/>')
            body.append(f'<path d="M{_f(x - 5)},{_f(y)} L{_f(x)},{_f(y - 6)} L{_f(x + 5)},{_f(y)} '
                        f'L{_f(x)},{_f(y + 6)} Z" fill="{color}" stroke="black" stroke-width="0.6"/>')
            body.append(_text(panel.left + 6, panel.top + 14,
                              f"{int(round(p * 100))}% threshold {thr:.1f}", 11, "start"))
        body.append("</g>")
    body.append("</svg>")
    return "\n".join(body) + "\n"


def write_report(path, fits, tables, p: float = 0.75, seed=None) -> Path:
    path = Path(path)
    path.write_text(render_svg(fits, tables, p, seed), encoding="utf-8")
    return path
