"""Dependency-free SVG 1.1 plots: log-FAR ROC, threshold functions, histograms.

Pixel coordinates are written with three decimals.  Axis ranges are stored
as ``data-*`` attributes on the root element so the plotted coordinates can
be recomputed from the CSV exports.
"""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from ..metrics import RocCurve, ThresholdFunction, auc, format_float

# Okabe-Ito; teal then orange for the usual two-group comparison.
DEFAULT_PALETTE = (
    "#009E73", "#E69F00", "#0072B2", "#D55E00", "#CC79A7", "#56B4E9", "#F0E442", "#000000",
)
POOLED_COLOR = "#555555"
GENUINE_COLOR = "#CC79A7"
IMPOSTOR_COLOR = "#009E73"
GRID_COLOR = "#999999"

WIDTH, HEIGHT = 720, 480
LEFT, RIGHT, TOP, BOTTOM = 70, 230, 30, 60
PLOT_W = WIDTH - LEFT - RIGHT
PLOT_H = HEIGHT - TOP - BOTTOM
MIN_FLOOR = 1e-6
MAX_BINS = 2000


def fmt(v: float) -> str:
    return f"{v:.3f}"


def far_floor(n_impostor_max: int) -> float:
    return max(MIN_FLOOR, 1.0 / (2 * n_impostor_max))


def log_x(far: float, floor: float) -> float:
    lf = math.log10(floor)
    return LEFT + (math.log10(max(far, floor)) - lf) / (0.0 - lf) * PLOT_W


def log_y(far: float, floor: float) -> float:
    lf = math.log10(floor)
    return TOP + PLOT_H - (math.log10(max(far, floor)) - lf) / (0.0 - lf) * PLOT_H


def lin_y(v: float, vmax: float = 1.0) -> float:
    return TOP + PLOT_H - (v / vmax) * PLOT_H


def lin_x(v: float, lo: float, hi: float) -> float:
    return LEFT + (v - lo) / (hi - lo) * PLOT_W


def color_for(index: int, label: str, palette: Sequence[str] | None = None) -> str:
    if label == "<all>":
        return POOLED_COLOR
    pal = tuple(palette) if palette else DEFAULT_PALETTE
    return pal[index % len(pal)]


class _Doc:
    def __init__(self, title: str, **data):
        attrs = "".join(f" data-{k.replace('_', '-')}={quoteattr(str(v))}" for k, v in data.items())
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}"{attrs}>',
            f"<title>{escape(title)}</title>",
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="#000000"/>',
        ]

    def add(self, s: str):
        self.parts.append(s)

    def text(self, x, y, s, anchor="middle", size=12, **extra):
        attrs = "".join(
            f" {k.rstrip('_').replace('_', '-')}={quoteattr(str(v))}" for k, v in extra.items()
        )
        self.add(
            f'<text x="{fmt(x)}" y="{fmt(y)}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}"{attrs}>{escape(s)}</text>'
        )

    def vline(self, x, cls, color=GRID_COLOR, dash="2,3"):
        self.add(
            f'<line class="{cls}" x1="{fmt(x)}" y1="{TOP}" x2="{fmt(x)}" y2="{TOP + PLOT_H}" '
            f'stroke="{color}" stroke-dasharray="{dash}"/>'
        )

    def polyline(self, pts, color, label, cls="curve"):
        coords = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in pts)
        self.add(
            f'<polyline class="{cls}" data-label={quoteattr(label)} fill="none" stroke="{color}" '
            f'stroke-width="1.5" points="{coords}"/>'
        )

    def legend(self, entries):
        x0 = LEFT + PLOT_W + 12
        for k, (label, color) in enumerate(entries):
            y = TOP + 14 + 18 * k
            self.add(
                f'<rect class="legend-swatch" x="{x0}" y="{y - 9}" width="14" height="4" fill="{color}"/>'
            )
            self.text(x0 + 20, y, label, anchor="start", size=11, class_="legend-entry")

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _decade_ticks(floor: float) -> list[int]:
    return list(range(math.ceil(math.log10(floor) - 1e-12), 1))


def plot_roc(
    curves: Sequence[tuple[str, RocCurve]],
    far_targets: Sequence[float] = (1e-4, 1e-3),
    palette: Sequence[str] | None = None,
    title: str = "ROC",
) -> str:
    """VR against log10 FAR, one polyline per curve, dotted lines at each FAR target."""
    if not curves:
        raise ValueError("need at least one curve")
    floor = far_floor(max(c.n_impostor for _, c in curves))
    doc = _Doc(title, far_floor=format_float(floor), x_scale="log10-far", y_scale="vr")
    for k in _decade_ticks(floor):
        x = log_x(10.0**k, floor)
        doc.text(x, TOP + PLOT_H + 18, f"1e{k}", class_="tick")
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        doc.text(LEFT - 8, lin_y(v) + 4, f"{v:.2f}", anchor="end", class_="tick")
    for f in far_targets:
        if f >= floor:
            doc.vline(log_x(f, floor), "far-target")
    doc.text(LEFT + PLOT_W / 2, HEIGHT - 18, "False accept rate (log scale)")
    doc.text(16, TOP + PLOT_H / 2, "Verification rate", transform=f"rotate(-90 16 {fmt(TOP + PLOT_H / 2)})")
    doc.text(LEFT + 4, TOP + PLOT_H - 6, f"FAR floor {floor:.3g}: zero FAR drawn at floor", anchor="start", size=9)
    entries, gi = [], 0
    for label, roc in curves:
        color = color_for(gi, label, palette)
        if label != "<all>":
            gi += 1
        pts = [(log_x(f, floor), lin_y(v)) for f, v in zip(roc.far.tolist(), roc.vr.tolist())]
        doc.polyline(pts, color, label)
        entries.append(
            (f"{label}: AUC={auc(roc):.6f} n_g={roc.n_genuine} n_i={roc.n_impostor}", color)
        )
    doc.legend(entries)
    return doc.render()


def threshold_range(functions: Sequence[tuple[str, ThresholdFunction]]) -> tuple[float, float]:
    finite = np.concatenate([f.thresholds[1:-1] for _, f in functions])
    lo, hi = float(finite.min()), float(finite.max())
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    return lo - pad, hi + pad


def threshold_step_points(fn: ThresholdFunction, lo: float, hi: float, floor: float):
    """Vertices of the FAR step function in pixel space.

    FAR equals ``far[k]`` on ``(t[k-1], t[k]]``; each finite threshold
    contributes a vertex at its own FAR and one just past it.
    """
    t = fn.thresholds.tolist()
    far = fn.far.tolist()
    pts = [(lin_x(lo, lo, hi), log_y(far[1], floor))]
    for k in range(1, len(t) - 1):
        x = lin_x(t[k], lo, hi)
        pts.append((x, log_y(far[k], floor)))
        pts.append((x, log_y(far[k + 1], floor)))
    pts.append((lin_x(hi, lo, hi), log_y(far[-1], floor)))
    return pts


def plot_threshold_functions(
    functions: Sequence[tuple[str, ThresholdFunction]],
    far_targets: Sequence[float] = (1e-4, 1e-3),
    palette: Sequence[str] | None = None,
    title: str = "Threshold functions",
) -> str:
    """FAR (log10) as a step function of the decision threshold."""
    if not functions:
        raise ValueError("need at least one threshold function")
    floor = far_floor(max(f.n_impostor for _, f in functions))
    lo, hi = threshold_range(functions)
    doc = _Doc(
        title,
        far_floor=format_float(floor),
        x_min=format_float(lo),
        x_max=format_float(hi),
        x_scale="threshold",
        y_scale="log10-far",
    )
    for k in _decade_ticks(floor):
        doc.text(LEFT - 8, log_y(10.0**k, floor) + 4, f"1e{k}", anchor="end", class_="tick")
    for v in np.linspace(lo, hi, 5).tolist():
        doc.text(lin_x(v, lo, hi), TOP + PLOT_H + 18, f"{v:.3g}", class_="tick")
    for f in far_targets:
        if f >= floor:
            y = log_y(f, floor)
            doc.add(
                f'<line class="far-target" x1="{LEFT}" y1="{fmt(y)}" x2="{LEFT + PLOT_W}" '
                f'y2="{fmt(y)}" stroke="{GRID_COLOR}" stroke-dasharray="2,3"/>'
            )
    doc.text(LEFT + PLOT_W / 2, HEIGHT - 18, "Similarity threshold")
    doc.text(16, TOP + PLOT_H / 2, "False accept rate (log scale)", transform=f"rotate(-90 16 {fmt(TOP + PLOT_H / 2)})")
    entries, gi = [], 0
    for label, fn in functions:
        color = color_for(gi, label, palette)
        if label != "<all>":
            gi += 1
        doc.polyline(threshold_step_points(fn, lo, hi, floor), color, label)
        entries.append((f"{label}: n_i={fn.n_impostor}", color))
    doc.legend(entries)
    return doc.render()


def freedman_diaconis_bins(x: np.ndarray) -> int:
    x = np.asarray(x, dtype=np.float64)
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    span = x.max() - x.min()
    if iqr <= 0 or span <= 0:
        return 1
    width = 2.0 * iqr * len(x) ** (-1.0 / 3.0)
    return int(min(MAX_BINS, max(1, math.ceil(span / width))))


def histogram_layout(genuine, impostor):
    """Shared bin edges and density heights for the two distributions."""
    gen = np.asarray(genuine, dtype=np.float64)
    imp = np.asarray(impostor, dtype=np.float64)
    both = np.concatenate([gen, imp])
    nbins = freedman_diaconis_bins(both)
    lo, hi = float(both.min()), float(both.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, nbins + 1)
    gh, _ = np.histogram(gen, bins=edges, density=True)
    ih, _ = np.histogram(imp, bins=edges, density=True)
    return edges, gh, ih


def plot_histograms(
    genuine_scores,
    impostor_scores,
    thresholds: Sequence[float] = (),
    title: str = "Score distributions",
) -> str:
    """Overlaid density histograms (genuine pink, impostor teal) with dotted threshold lines."""
    gen = np.asarray(genuine_scores, dtype=np.float64)
    imp = np.asarray(impostor_scores, dtype=np.float64)
    if gen.size == 0 or imp.size == 0:
        raise ValueError("histograms need nonempty genuine and impostor scores")
    edges, gh, ih = histogram_layout(gen, imp)
    lo, hi = float(edges[0]), float(edges[-1])
    top = float(max(gh.max(), ih.max()))
    doc = _Doc(title, x_min=format_float(lo), x_max=format_float(hi), bins=len(edges) - 1)
    for label, heights, color in (("impostor", ih, IMPOSTOR_COLOR), ("genuine", gh, GENUINE_COLOR)):
        for k, h in enumerate(heights.tolist()):
            if h <= 0:
                continue
            x0, x1 = lin_x(edges[k], lo, hi), lin_x(edges[k + 1], lo, hi)
            y = lin_y(h, top)
            doc.add(
                f'<rect class="bar {label}" data-bin="{k}" data-density="{format_float(h)}" '
                f'x="{fmt(x0)}" y="{fmt(y)}" width="{fmt(x1 - x0)}" height="{fmt(TOP + PLOT_H - y)}" '
                f'fill="{color}" fill-opacity="0.5"/>'
            )
    for t in thresholds:
        if math.isfinite(t) and lo <= t <= hi:
            doc.vline(lin_x(t, lo, hi), "threshold")
    for v in np.linspace(lo, hi, 5).tolist():
        doc.text(lin_x(v, lo, hi), TOP + PLOT_H + 18, f"{v:.3g}", class_="tick")
    doc.text(LEFT + PLOT_W / 2, HEIGHT - 18, "Similarity score")
    doc.text(16, TOP + PLOT_H / 2, "Density", transform=f"rotate(-90 16 {fmt(TOP + PLOT_H / 2)})")
    doc.legend(
        [
            (f"same identity (n={gen.size})", GENUINE_COLOR),
            (f"different identity (n={imp.size})", IMPOSTOR_COLOR),
        ]
    )
    return doc.render()

