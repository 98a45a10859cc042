"""Deterministic SVG emission for effect, interaction and screening plots.

Every coordinate is formatted to fixed precision and all styling is
hard-coded (monospace font, fixed dimensions, fixed palette), so identical
inputs produce byte-identical files; golden-file tests rely on this.
No raster output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .analysis import MarginalMeans
from .core import Term
from .errors import ArityMismatch
from .trpd import ControlNoiseInteraction


class PlotKind(str, Enum):
    MAIN_EFFECTS = "main_effects"
    INTERACTION2 = "interaction2"
    INTERACTION3_COMBINED = "interaction3_combined"
    HALF_NORMAL = "half_normal"
    HISTOGRAM_GRID = "histogram_grid"


@dataclass(frozen=True)
class PlotSpec:
    kind: PlotKind
    reference_line: float | None = None
    out: str | None = None
    label_top: int = 6
    title: str = ""


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f", "#bcbd22")
_DASHES = ("", "6,3", "2,2", "8,3,2,3", "4,2,1,2")
_FONT = 'font-family="monospace" font-size="11"'
_REF_COLOR = "#1f77b4"


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Svg:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts: list[str] = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect x="0" y="0" width="{width}" height="{height}" '
            'fill="white"/>']

    def line(self, x1, y1, x2, y2, color="black", width=1.0, dash=""):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" stroke="{color}" stroke-width="{width}"{d}/>')

    def polyline(self, pts, color="black", width=1.5, dash=""):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        body = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(
            f'<polyline points="{body}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{d}/>')

    def circle(self, x, y, r=2.5, color="black", fill="black"):
        self.parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" '
            f'stroke="{color}" fill="{fill}"/>')

    def rect(self, x, y, w, h, fill="#9ecae1", stroke="#333333"):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{fill}" stroke="{stroke}" '
            'stroke-width="0.5"/>')

    def text(self, x, y, s, anchor="middle", color="black", rotate=None):
        r = (f' transform="rotate(-90 {_fmt(x)} {_fmt(y)})"'
             if rotate else "")
        s = (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" {_FONT} '
            f'text-anchor="{anchor}" fill="{color}"{r}>{s}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Deterministic 1-2-5 tick positions covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if span / step <= target:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(round(t, 10))
        t += step
    return ticks


@dataclass
class _Frame:
    """Maps data coordinates into one panel's pixel rectangle."""

    x0: float
    y0: float
    w: float
    h: float
    xlim: tuple[float, float]
    ylim: tuple[float, float]

    def px(self, x: float) -> float:
        a, b = self.xlim
        return self.x0 + (x - a) / (b - a) * self.w

    def py(self, y: float) -> float:
        a, b = self.ylim
        return self.y0 + self.h - (y - a) / (b - a) * self.h


def _pad(lo: float, hi: float, frac: float = 0.08) -> tuple[float, float]:
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - frac * span, hi + frac * span


def _draw_y_axis(svg: _Svg, fr: _Frame, label: str = ""):
    svg.line(fr.x0, fr.y0, fr.x0, fr.y0 + fr.h)
    for t in nice_ticks(*fr.ylim):
        if fr.ylim[0] <= t <= fr.ylim[1]:
            y = fr.py(t)
            svg.line(fr.x0 - 4, y, fr.x0, y)
            svg.text(fr.x0 - 7, y + 3.5, f"{t:g}", anchor="end")
    if label:
        svg.text(fr.x0 - 38, fr.y0 + fr.h / 2, label, rotate=True)


def _draw_ref(svg: _Svg, fr: _Frame, ref: float | None):
    if ref is not None and fr.ylim[0] <= ref <= fr.ylim[1]:
        svg.line(fr.px(fr.xlim[0]), fr.py(ref), fr.px(fr.xlim[1]),
                 fr.py(ref), color=_REF_COLOR, dash="5,3")


def main_effects_svg(blocks: Sequence[MarginalMeans],
                     spec: PlotSpec, ylabel: str = "response") -> str:
    """One panel per factor, shared response axis."""
    for mm in blocks:
        if mm.term.order != 1:
            raise ArityMismatch("main-effects plot needs order-1 terms")
    if not blocks:
        raise ArityMismatch("main-effects plot needs at least one factor")
    all_vals = np.concatenate([mm.means.ravel() for mm in blocks]).tolist()
    if spec.reference_line is not None:
        all_vals.append(spec.reference_line)
    ylim = _pad(min(all_vals), max(all_vals))
    panel_w, h, left, top, gap = 150, 260, 60, 30, 12
    width = left + len(blocks) * (panel_w + gap) + 10
    svg = _Svg(width, h + 70)
    if spec.title:
        svg.text(width / 2, 16, spec.title)
    for k, mm in enumerate(blocks):
        labels = mm.level_labels[0]
        fr = _Frame(left + k * (panel_w + gap), top, panel_w, h - top,
                    (-0.5, len(labels) - 0.5), ylim)
        svg.line(fr.x0, fr.y0 + fr.h, fr.x0 + fr.w, fr.y0 + fr.h)
        if k == 0:
            _draw_y_axis(svg, fr, ylabel)
        else:
            svg.line(fr.x0, fr.y0, fr.x0, fr.y0 + fr.h)
        _draw_ref(svg, fr, spec.reference_line)
        pts = [(fr.px(i), fr.py(float(mm.means[i])))
               for i in range(len(labels))]
        svg.polyline(pts, color="black")
        for i, (x, y) in enumerate(pts):
            svg.circle(x, y)
            svg.text(fr.px(i), fr.y0 + fr.h + 14, labels[i])
        svg.text(fr.x0 + fr.w / 2, fr.y0 + fr.h + 30, mm.factor_names[0])
    return svg.render()


def interaction2_svg(mm: MarginalMeans, spec: PlotSpec,
                     ylabel: str = "response", x_second: bool = True) -> str:
    """Two-factor interaction: one line per level of the non-x factor.

    By default the term's second factor runs along x; x_second=False
    transposes the panel.
    """
    if mm.term.order != 2:
        raise ArityMismatch("interaction plot needs an order-2 term")
    if x_second:
        line_labels, x_labels = mm.level_labels
        vals = mm.means
        names = mm.factor_names
    else:
        x_labels, line_labels = mm.level_labels
        vals = mm.means.T
        names = (mm.factor_names[1], mm.factor_names[0])
    all_vals = vals.ravel().tolist()
    if spec.reference_line is not None:
        all_vals.append(spec.reference_line)
    ylim = _pad(min(all_vals), max(all_vals))
    w, h, left, top = 430, 300, 60, 30
    svg = _Svg(w, h + 60)
    title = spec.title or f"{names[0]}:{names[1]}"
    svg.text(w / 2, 16, title)
    fr = _Frame(left, top, w - left - 110, h - top,
                (-0.5, len(x_labels) - 0.5), ylim)
    svg.line(fr.x0, fr.y0 + fr.h, fr.x0 + fr.w, fr.y0 + fr.h)
    _draw_y_axis(svg, fr, ylabel)
    _draw_ref(svg, fr, spec.reference_line)
    for j, lab in enumerate(x_labels):
        svg.text(fr.px(j), fr.y0 + fr.h + 14, lab)
    svg.text(fr.x0 + fr.w / 2, fr.y0 + fr.h + 30, names[1])
    for i, lab in enumerate(line_labels):
        color = _PALETTE[i % len(_PALETTE)]
        pts = [(fr.px(j), fr.py(float(vals[i, j])))
               for j in range(len(x_labels))]
        svg.polyline(pts, color=color, dash=_DASHES[i % len(_DASHES)])
        for x, y in pts:
            svg.circle(x, y, r=2.2, color=color, fill=color)
        ly = top + 14 * i
        svg.line(fr.x0 + fr.w + 12, ly, fr.x0 + fr.w + 32, ly, color=color,
                 dash=_DASHES[i % len(_DASHES)], width=1.5)
        svg.text(fr.x0 + fr.w + 36, ly + 3.5, lab, anchor="start")
    return svg.render()


def interaction3_svg(data: ControlNoiseInteraction, spec: PlotSpec,
                     ylabel: str = "response") -> str:
    """Combined-control interaction: one line per control combination.

    Line style tracks the first control factor, color the second (matching
    the 9-line layout used for control-by-noise robustness reading).
    """
    if len(data.control_names) < 1:
        raise ArityMismatch("combined-control plot needs control factors")
    vals = data.means
    all_vals = vals.ravel().tolist()
    if spec.reference_line is not None:
        all_vals.append(spec.reference_line)
    ylim = _pad(min(all_vals), max(all_vals))
    w, h, left, top = 470, 320, 60, 30
    svg = _Svg(w, h + 60)
    title = spec.title or ("/".join(data.control_names) +
                           f" x {data.noise_name}")
    svg.text(w / 2, 16, title)
    fr = _Frame(left, top, w - left - 130, h - top,
                (-0.5, len(data.noise_labels) - 0.5), ylim)
    svg.line(fr.x0, fr.y0 + fr.h, fr.x0 + fr.w, fr.y0 + fr.h)
    _draw_y_axis(svg, fr, ylabel)
    _draw_ref(svg, fr, spec.reference_line)
    for j, lab in enumerate(data.noise_labels):
        svg.text(fr.px(j), fr.y0 + fr.h + 14, lab)
    svg.text(fr.x0 + fr.w / 2, fr.y0 + fr.h + 30, data.noise_name)
    first_levels = sorted({labs[0] for labs in data.control_labels})
    second_levels = sorted({labs[-1] for labs in data.control_labels})
    for i, labs in enumerate(data.control_labels):
        dash = _DASHES[first_levels.index(labs[0]) % len(_DASHES)]
        color = _PALETTE[second_levels.index(labs[-1]) % len(_PALETTE)]
        pts = [(fr.px(j), fr.py(float(vals[i, j])))
               for j in range(len(data.noise_labels))]
        svg.polyline(pts, color=color, dash=dash)
        ly = top + 14 * i
        svg.line(fr.x0 + fr.w + 12, ly, fr.x0 + fr.w + 32, ly, color=color,
                 dash=dash, width=1.5)
        svg.text(fr.x0 + fr.w + 36, ly + 3.5, "/".join(labs), anchor="start")
    return svg.render()


def half_normal_svg(points: Sequence[tuple[float, float, Term]],
                    factor_names: Sequence[str], spec: PlotSpec) -> str:
    """Half-normal quantile plot; the top label_top |effects| are named."""
    if len(points) < 2:
        raise ArityMismatch("half-normal plot needs at least 2 points")
    qs = [p[0] for p in points]
    vals = [p[1] for p in points]
    xlim = (0.0, max(qs) * 1.08)
    ylim = (0.0, (max(vals) or 1.0) * 1.12)
    w, h, left, top = 460, 380, 60, 30
    svg = _Svg(w, h + 55)
    svg.text(w / 2, 16, spec.title or "half-normal plot of |effects|")
    fr = _Frame(left, top, w - left - 20, h - top, xlim, ylim)
    svg.line(fr.x0, fr.y0 + fr.h, fr.x0 + fr.w, fr.y0 + fr.h)
    _draw_y_axis(svg, fr, "|effect|")
    for t in nice_ticks(*xlim, target=6):
        if xlim[0] <= t <= xlim[1]:
            svg.line(fr.px(t), fr.y0 + fr.h, fr.px(t), fr.y0 + fr.h + 4)
            svg.text(fr.px(t), fr.y0 + fr.h + 16, f"{t:g}")
    svg.text(fr.x0 + fr.w / 2, fr.y0 + fr.h + 32, "half-normal quantile")
    labeled = set()
    if spec.label_top > 0:
        order = sorted(range(len(points)),
                       key=lambda i: (-points[i][1],
                                      points[i][2].name(factor_names)))
        labeled = set(order[:spec.label_top])
    for i, (q, v, term) in enumerate(points):
        x, y = fr.px(q), fr.py(v)
        svg.circle(x, y, r=2.5)
        if i in labeled:
            svg.text(x - 6, y + 3.5, term.name(factor_names), anchor="end")
    return svg.render()


def histogram_grid_svg(groups: dict[tuple[str, ...], np.ndarray],
                       row_labels: Sequence[str], col_labels: Sequence[str],
                       spec: PlotSpec, bins: int = 12) -> str:
    """Histogram per control combination; shared bins and count scale.

    Group keys must be (row label, col label) pairs covering the grid.
    """
    want = {(r, c) for r in row_labels for c in col_labels}
    if set(groups) != want:
        raise ArityMismatch(
            f"histogram grid keys {sorted(groups)} do not cover "
            f"{sorted(want)}")
    allvals = np.concatenate(list(groups.values()))
    lo, hi = float(allvals.min()), float(allvals.max())
    if spec.reference_line is not None:
        lo, hi = min(lo, spec.reference_line), max(hi, spec.reference_line)
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    counts = {key: np.histogram(v, bins=edges)[0] for key, v in groups.items()}
    peak = max(int(c.max()) for c in counts.values()) or 1
    pw, ph, left, top, gap = 150, 110, 60, 40, 14
    width = left + len(col_labels) * (pw + gap) + 10
    height = top + len(row_labels) * (ph + gap + 26) + 30
    svg = _Svg(width, height)
    if spec.title:
        svg.text(width / 2, 16, spec.title)
    for ri, r in enumerate(row_labels):
        for ci, c in enumerate(col_labels):
            x0 = left + ci * (pw + gap)
            y0 = top + ri * (ph + gap + 26)
            fr = _Frame(x0, y0, pw, ph, (lo, hi), (0, peak * 1.05))
            svg.text(x0 + pw / 2, y0 - 6, f"{r}/{c}")
            svg.line(x0, y0 + ph, x0 + pw, y0 + ph)
            svg.line(x0, y0, x0, y0 + ph)
            n = counts[(r, c)]
            for b in range(bins):
                if n[b] == 0:
                    continue
                bx = fr.px(float(edges[b]))
                bw = fr.px(float(edges[b + 1])) - bx
                by = fr.py(float(n[b]))
                svg.rect(bx, by, bw, y0 + ph - by)
            if spec.reference_line is not None:
                svg.line(fr.px(spec.reference_line), y0,
                         fr.px(spec.reference_line), y0 + ph,
                         color=_REF_COLOR, dash="4,3")
            for t in nice_ticks(lo, hi, target=3):
                if lo <= t <= hi:
                    svg.text(fr.px(t), y0 + ph + 12, f"{t:g}")
    return svg.render()


def emit_plot(data, spec: PlotSpec, **kwargs) -> str:
    """Render the plot described by spec; writes to spec.out when set."""
    if spec.kind == PlotKind.MAIN_EFFECTS:
        text = main_effects_svg(data, spec, **kwargs)
    elif spec.kind == PlotKind.INTERACTION2:
        text = interaction2_svg(data, spec, **kwargs)
    elif spec.kind == PlotKind.INTERACTION3_COMBINED:
        text = interaction3_svg(data, spec, **kwargs)
    elif spec.kind == PlotKind.HALF_NORMAL:
        text = half_normal_svg(data, **kwargs, spec=spec)
    elif spec.kind == PlotKind.HISTOGRAM_GRID:
        text = histogram_grid_svg(data, **kwargs, spec=spec)
    else:
        raise ArityMismatch(f"unknown plot kind {spec.kind}")
    if spec.out:
        with open(spec.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
