"""Deterministic, self-contained SVG 1.1 plots.

Every emitter is a pure function of its inputs: coordinates are written with
four fractional digits, so identical inputs give byte-identical documents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .dataset import FeatureMatrix
from .errors import ParameterError

PALETTES = {
    "set1": ("#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#ffff33", "#a65628",
             "#f781bf", "#999999"),
    "tab10": ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
              "#7f7f7f", "#bcbd22", "#17becf"),
    "dark2": ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d",
              "#666666"),
}

DEFAULT_GRID = 200
_LIGHT = (247, 251, 255)
_DARK = (8, 48, 107)


@dataclass(frozen=True)
class PlotSpec:
    width: float = 640.0
    height: float = 480.0
    margin_left: float = 64.0
    margin_right: float = 24.0
    margin_top: float = 40.0
    margin_bottom: float = 52.0
    palette: str = "set1"
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    point_radius: float = 3.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ParameterError("plot width and height must be positive")
        if self.palette not in PALETTES:
            raise ParameterError(f"unknown palette {self.palette!r}; choose from {sorted(PALETTES)}")
        if self.plot_width <= 0 or self.plot_height <= 0:
            raise ParameterError("margins leave no room for the plot area")

    @property
    def plot_width(self) -> float:
        return self.width - self.margin_left - self.margin_right

    @property
    def plot_height(self) -> float:
        return self.height - self.margin_top - self.margin_bottom

    def color(self, index: int) -> str:
        colors = PALETTES[self.palette]
        return colors[index % len(colors)]


@dataclass(frozen=True)
class SvgDocument:
    text: str

    def __str__(self) -> str:
        return self.text

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text)


def fmt(v: float) -> str:
    s = f"{float(v):.4f}"
    return "0.0000" if s == "-0.0000" else s


def _shade(fraction: float) -> str:
    f = min(1.0, max(0.0, float(fraction)))
    rgb = [round(a + (b - a) * f) for a, b in zip(_LIGHT, _DARK)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


class _Canvas:
    def __init__(self, spec: PlotSpec, kind: str, meta: dict | None):
        self.spec = spec
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{fmt(spec.width)}" '
            f'height="{fmt(spec.height)}" viewBox="0 0 {fmt(spec.width)} {fmt(spec.height)}">',
        ]
        info = {"generator": f"astromls {__version__}", "kind": kind, **(meta or {})}
        self.parts.append(f"<metadata>{escape(json.dumps(info, sort_keys=True))}</metadata>")
        self.parts.append(
            f'<rect class="background" x="0.0000" y="0.0000" width="{fmt(spec.width)}" '
            f'height="{fmt(spec.height)}" fill="#ffffff"/>'
        )

    def add(self, element: str) -> None:
        self.parts.append(element)

    def comment(self, text: str) -> None:
        self.parts.append(f"<!-- {text.replace('--', '- -')} -->")

    def text(self, x, y, content, anchor="start", size=12, cls=None, fill="#000000", rotate=False):
        attrs = [f'x="{fmt(x)}"', f'y="{fmt(y)}"', f'font-size="{size}"',
                 f'text-anchor="{anchor}"', f'fill="{fill}"', 'font-family="sans-serif"']
        if cls:
            attrs.insert(0, f'class="{cls}"')
        if rotate:
            attrs.append(f'transform="rotate(-90 {fmt(x)} {fmt(y)})"')
        self.parts.append(f"<text {' '.join(attrs)}>{escape(str(content))}</text>")

    def finish(self) -> SvgDocument:
        spec = self.spec
        if spec.title:
            self.text(spec.width / 2, min(spec.margin_top / 2 + 6, spec.height), spec.title,
                      anchor="middle", size=14, cls="title")
        return SvgDocument("\n".join(self.parts + ["</svg>"]) + "\n")


class _Axes:
    """Linear map from a data rectangle onto the spec's plot area."""

    def __init__(self, spec: PlotSpec, xlim, ylim, left=None, top=None, width=None, height=None):
        self.spec = spec
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.left = spec.margin_left if left is None else left
        self.top = spec.margin_top if top is None else top
        self.w = spec.plot_width if width is None else width
        self.h = spec.plot_height if height is None else height

    def px(self, x):
        return self.left + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return self.top + (self.y1 - np.asarray(y, dtype=float)) / (self.y1 - self.y0) * self.h

    def frame(self, canvas: _Canvas, ticks: int = 5) -> None:
        spec = self.spec
        canvas.add(
            f'<rect class="frame" x="{fmt(self.left)}" y="{fmt(self.top)}" width="{fmt(self.w)}" '
            f'height="{fmt(self.h)}" fill="none" stroke="#333333" stroke-width="1"/>'
        )
        bottom = self.top + self.h
        for v in np.linspace(self.x0, self.x1, ticks):
            x = float(self.px(v))
            canvas.add(f'<line x1="{fmt(x)}" y1="{fmt(bottom)}" x2="{fmt(x)}" '
                       f'y2="{fmt(min(bottom + 4, spec.height))}" stroke="#333333"/>')
            canvas.text(x, min(bottom + 16, spec.height), f"{v:.3g}", anchor="middle", size=10)
        for v in np.linspace(self.y0, self.y1, ticks):
            y = float(self.py(v))
            canvas.add(f'<line x1="{fmt(max(self.left - 4, 0))}" y1="{fmt(y)}" x2="{fmt(self.left)}" '
                       f'y2="{fmt(y)}" stroke="#333333"/>')
            canvas.text(max(self.left - 6, 0), y + 3, f"{v:.3g}", anchor="end", size=10)
        if spec.xlabel:
            canvas.text(self.left + self.w / 2, min(bottom + 36, spec.height - 2), spec.xlabel,
                        anchor="middle", cls="xlabel")
        if spec.ylabel:
            canvas.text(max(self.left - 44, 12), self.top + self.h / 2, spec.ylabel,
                        anchor="middle", cls="ylabel", rotate=True)


def _legend(canvas: _Canvas, spec: PlotSpec, entries: Sequence[tuple[str, str]], left, top) -> None:
    for i, (color, label) in enumerate(entries):
        y = top + 6 + 16 * i
        if y + 10 > spec.height:
            break
        canvas.add(f'<rect class="legend-key" x="{fmt(left)}" y="{fmt(y)}" width="10.0000" '
                   f'height="10.0000" fill="{color}"/>')
        canvas.text(left + 14, y + 9, label, size=11, cls="legend")


def _points(points) -> np.ndarray:
    pts = np.asarray(points.values if isinstance(points, FeatureMatrix) else points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ParameterError(f"expected an n x 2 point array, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise ParameterError("nothing to plot: no points")
    if not np.isfinite(pts).all():
        raise ParameterError("points contain non-finite coordinates")
    return pts


def _padded_limits(values: np.ndarray, pad: float = 0.05) -> tuple[float, float]:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _class_label(class_names, k) -> str:
    return str(class_names[k]) if class_names is not None and k < len(class_names) else str(k)


# --------------------------------------------------------------------------
# data visualizers


def scatter_classes(
    points,
    labels,
    spec: PlotSpec | None = None,
    region_model=None,
    grid: int = DEFAULT_GRID,
    class_names: Sequence[str] | None = None,
    meta: dict | None = None,
) -> SvgDocument:
    """Scatter plot coloured by class, optionally over a decision-region map.

    With ``region_model`` (anything with ``predict`` on an ``m x 2`` array),
    a ``grid x grid`` lattice over the padded bounding box is classified and
    painted in the predicted class colour; equal neighbours in a row are
    merged into one rectangle.
    """
    spec = spec or PlotSpec()
    pts = _points(points)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (pts.shape[0],):
        raise ParameterError("one label per point is required")
    axes = _Axes(spec, _padded_limits(pts[:, 0]), _padded_limits(pts[:, 1]))
    canvas = _Canvas(spec, "scatter", meta)

    if region_model is not None:
        if grid < 2:
            raise ParameterError("decision-region grid must be at least 2")
        canvas.comment(f"decision-region grid: {grid}x{grid}")
        xs = axes.x0 + (np.arange(grid) + 0.5) * (axes.x1 - axes.x0) / grid
        ys = axes.y1 - (np.arange(grid) + 0.5) * (axes.y1 - axes.y0) / grid   # top row first
        gx, gy = np.meshgrid(xs, ys)
        pred = np.asarray(region_model.predict(np.column_stack([gx.ravel(), gy.ravel()])))
        pred = pred.reshape(grid, grid)
        cw, ch = axes.w / grid, axes.h / grid
        canvas.add('<g class="regions" fill-opacity="0.35">')
        for r in range(grid):
            row = pred[r]
            start = 0
            for c in range(1, grid + 1):
                if c == grid or row[c] != row[start]:
                    canvas.add(
                        f'<rect class="region" data-class="{int(row[start])}" '
                        f'x="{fmt(axes.left + start * cw)}" y="{fmt(axes.top + r * ch)}" '
                        f'width="{fmt((c - start) * cw)}" height="{fmt(ch)}" '
                        f'fill="{spec.color(int(row[start]))}"/>'
                    )
                    start = c
        canvas.add("</g>")

    axes.frame(canvas)
    cx, cy = axes.px(pts[:, 0]), axes.py(pts[:, 1])
    canvas.add('<g class="points" stroke="#222222" stroke-width="0.5">')
    for x, y, k in zip(cx, cy, labels):
        canvas.add(f'<circle cx="{fmt(x)}" cy="{fmt(y)}" r="{fmt(spec.point_radius)}" '
                   f'fill="{spec.color(int(k))}"/>')
    canvas.add("</g>")
    present = sorted(set(labels.tolist()))
    _legend(canvas, spec, [(spec.color(k), _class_label(class_names, k)) for k in present],
            axes.left + axes.w - 90, axes.top)
    return canvas.finish()


def andrews_values(x, t) -> np.ndarray:
    """``f(t) = x1/sqrt(2) + x2 sin t + x3 cos t + x4 sin 2t + x5 cos 2t + ...`` per row."""
    x = np.asarray(x.values if isinstance(x, FeatureMatrix) else x, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.outer(x[:, 0], np.full(t.size, 1.0 / math.sqrt(2.0)))
    for j in range(1, x.shape[1]):
        harmonic = (j + 1) // 2
        basis = np.sin(harmonic * t) if j % 2 == 1 else np.cos(harmonic * t)
        out += np.outer(x[:, j], basis)
    return out


def andrews_curves(
    x,
    labels,
    resolution: int = 101,
    spec: PlotSpec | None = None,
    class_names: Sequence[str] | None = None,
    meta: dict | None = None,
) -> SvgDocument:
    """One polyline per row, ``t`` sampled uniformly on [-pi, pi]."""
    spec = spec or PlotSpec()
    values = np.asarray(x.values if isinstance(x, FeatureMatrix) else x, dtype=float)
    if values.ndim != 2 or values.size == 0:
        raise ParameterError("andrews_curves needs a nonempty n x d matrix")
    if resolution < 16:
        raise ParameterError("resolution must be at least 16")
    labels = np.asarray(labels, dtype=np.int64)
    t = np.linspace(-math.pi, math.pi, resolution)
    f = andrews_values(values, t)
    axes = _Axes(spec, (-math.pi, math.pi), _padded_limits(f))
    canvas = _Canvas(spec, "andrews", meta)
    axes.frame(canvas)
    px = axes.px(t)
    canvas.add('<g class="curves" fill="none" stroke-width="1" stroke-opacity="0.6">')
    for row, k in zip(f, labels):
        pts = " ".join(f"{fmt(a)},{fmt(b)}" for a, b in zip(px, axes.py(row)))
        canvas.add(f'<polyline points="{pts}" stroke="{spec.color(int(k))}"/>')
    canvas.add("</g>")
    present = sorted(set(labels.tolist()))
    _legend(canvas, spec, [(spec.color(k), _class_label(class_names, k)) for k in present],
            axes.left + axes.w - 90, axes.top)
    return canvas.finish()


def radviz_positions(x) -> np.ndarray:
    """RadViz placement of each row inside the unit disk.

    Columns are min-max scaled to [0, 1] (constant columns get 0.5); a row
    sits at the weight-averaged position of the anchors
    ``(cos 2 pi j/d, sin 2 pi j/d)``, or at the origin if all weights are 0.
    """
    values = np.asarray(x.values if isinstance(x, FeatureMatrix) else x, dtype=float)
    if values.ndim != 2 or values.shape[1] < 2:
        raise ParameterError("radviz needs at least two features")
    lo, hi = values.min(axis=0), values.max(axis=0)
    span = hi - lo
    w = np.where(span > 0, (values - lo) / np.where(span > 0, span, 1.0), 0.5)
    d = values.shape[1]
    angles = 2.0 * math.pi * np.arange(d) / d
    anchors = np.column_stack([np.cos(angles), np.sin(angles)])
    total = w.sum(axis=1, keepdims=True)
    safe = np.where(total > 0, total, 1.0)
    return np.where(total > 0, (w @ anchors) / safe, 0.0)


def radviz(
    x,
    labels,
    spec: PlotSpec | None = None,
    class_names: Sequence[str] | None = None,
    feature_names: Sequence[str] | None = None,
    meta: dict | None = None,
) -> SvgDocument:
    spec = spec or PlotSpec()
    pos = radviz_positions(x)
    labels = np.asarray(labels, dtype=np.int64)
    d = (x.values if isinstance(x, FeatureMatrix) else np.asarray(x)).shape[1]
    if feature_names is None:
        feature_names = x.feature_names if isinstance(x, FeatureMatrix) else [f"x{j}" for j in range(d)]
    side = min(spec.plot_width, spec.plot_height)
    axes = _Axes(spec, (-1.2, 1.2), (-1.2, 1.2),
                 left=spec.margin_left + (spec.plot_width - side) / 2,
                 top=spec.margin_top + (spec.plot_height - side) / 2, width=side, height=side)
    canvas = _Canvas(spec, "radviz", meta)
    cx, cy = float(axes.px(0.0)), float(axes.py(0.0))
    radius = float(axes.px(1.0)) - cx
    canvas.add(f'<circle class="unit" cx="{fmt(cx)}" cy="{fmt(cy)}" r="{fmt(radius)}" '
               f'fill="none" stroke="#888888"/>')
    for j in range(d):
        a = 2.0 * math.pi * j / d
        ax, ay = float(axes.px(math.cos(a))), float(axes.py(math.sin(a)))
        canvas.add(f'<circle class="anchor" cx="{fmt(ax)}" cy="{fmt(ay)}" r="3.0000" fill="#000000"/>')
        lx, ly = float(axes.px(1.1 * math.cos(a))), float(axes.py(1.1 * math.sin(a)))
        canvas.text(lx, ly, feature_names[j], anchor="middle", size=10, cls="anchor-label")
    canvas.add('<g class="points" stroke="#222222" stroke-width="0.5">')
    for (u, v), k in zip(pos, labels):
        canvas.add(f'<circle cx="{fmt(axes.px(u))}" cy="{fmt(axes.py(v))}" '
                   f'r="{fmt(spec.point_radius)}" fill="{spec.color(int(k))}"/>')
    canvas.add("</g>")
    present = sorted(set(labels.tolist()))
    _legend(canvas, spec, [(spec.color(k), _class_label(class_names, k)) for k in present],
            spec.margin_left, spec.margin_top)
    return canvas.finish()


def _hex_layout(pts: np.ndarray, spec: PlotSpec, hex_radius: float) -> tuple[_Axes, dict]:
    if not hex_radius > 0:
        raise ParameterError("hex_radius must be positive")
    inset = 2.0 * hex_radius + 1.0
    left = max(spec.margin_left, inset)
    top = max(spec.margin_top, inset)
    width = spec.width - left - max(spec.margin_right, inset)
    height = spec.height - top - max(spec.margin_bottom, inset)
    if width <= 0 or height <= 0:
        raise ParameterError("hex_radius too large for the plot size")
    axes = _Axes(spec, _padded_limits(pts[:, 0]), _padded_limits(pts[:, 1]), left, top, width, height)
    px = axes.px(pts[:, 0]) - left
    py = axes.py(pts[:, 1]) - top
    # pointy-top axial coordinates with cube rounding
    q = (math.sqrt(3.0) / 3.0 * px - py / 3.0) / hex_radius
    r = (2.0 / 3.0 * py) / hex_radius
    xq, zr = q, r
    yq = -xq - zr
    rx, ry, rz = np.round(xq), np.round(yq), np.round(zr)
    dx, dy, dz = np.abs(rx - xq), np.abs(ry - yq), np.abs(rz - zr)
    fix_x = (dx > dy) & (dx > dz)
    fix_z = ~fix_x & (dz >= dy)
    rx = np.where(fix_x, -ry - rz, rx)
    rz = np.where(fix_z, -rx - ry, rz)
    counts: dict[tuple[int, int], int] = {}
    for a, b in zip(rx.astype(int).tolist(), rz.astype(int).tolist()):
        counts[(a, b)] = counts.get((a, b), 0) + 1
    return axes, counts


def hexbin_counts(points, spec: PlotSpec | None = None, hex_radius: float = 12.0) -> dict:
    """Occupied hexagons as ``{(q, r): count}`` in axial coordinates."""
    _, counts = _hex_layout(_points(points), spec or PlotSpec(), hex_radius)
    return counts


def hexbin(points, spec: PlotSpec | None = None, hex_radius: float = 12.0,
           meta: dict | None = None) -> SvgDocument:
    """Pointy-top hexagonal binning; shade scales linearly with the count."""
    spec = spec or PlotSpec()
    pts = _points(points)
    axes, counts = _hex_layout(pts, spec, hex_radius)
    canvas = _Canvas(spec, "hexbin", meta)
    axes.frame(canvas)
    peak = max(counts.values())
    canvas.add('<g class="hexbins" stroke="#ffffff" stroke-width="0.5">')
    for (q, r) in sorted(counts):
        n = counts[(q, r)]
        cx = axes.left + hex_radius * math.sqrt(3.0) * (q + r / 2.0)
        cy = axes.top + hex_radius * 1.5 * r
        corners = []
        for i in range(6):
            a = math.radians(60 * i - 30)
            corners.append(f"{fmt(cx + hex_radius * math.cos(a))},{fmt(cy + hex_radius * math.sin(a))}")
        canvas.add(f'<polygon class="hexbin" data-count="{n}" points="{" ".join(corners)}" '
                   f'fill="{_shade(n / peak)}"/>')
    canvas.add("</g>")
    canvas.text(spec.width - 4, min(spec.height - 4, spec.height), f"max count {peak}", anchor="end",
                size=10, cls="hexbin-scale")
    return canvas.finish()


# --------------------------------------------------------------------------
# evaluation visualizers


def confusion_heatmap(m, spec: PlotSpec | None = None, meta: dict | None = None) -> SvgDocument:
    """Grid of true (rows) by predicted (columns) counts, annotated."""
    spec = spec or PlotSpec()
    counts = np.asarray(m.counts)
    c = counts.shape[0]
    if c < 2:
        raise ParameterError("heatmap needs at least two classes")
    canvas = _Canvas(spec, "confusion", meta)
    side = min(spec.plot_width, spec.plot_height)
    cell = side / c
    left = spec.margin_left + (spec.plot_width - side) / 2
    top = spec.margin_top + (spec.plot_height - side) / 2
    peak = counts.max()
    for i in range(c):
        for j in range(c):
            frac = counts[i, j] / peak if peak > 0 else 0.0
            x, y = left + j * cell, top + i * cell
            canvas.add(f'<rect class="cell" data-row="{i}" data-col="{j}" x="{fmt(x)}" y="{fmt(y)}" '
                       f'width="{fmt(cell)}" height="{fmt(cell)}" fill="{_shade(frac)}" '
                       f'stroke="#ffffff"/>')
            canvas.text(x + cell / 2, y + cell / 2 + 4, int(counts[i, j]), anchor="middle",
                        cls="count", fill="#ffffff" if frac > 0.5 else "#000000")
    for k, name in enumerate(m.class_names):
        canvas.text(max(left - 6, 0), top + (k + 0.5) * cell + 4, name, anchor="end", size=11,
                    cls="row-label")
        canvas.text(left + (k + 0.5) * cell, min(top + side + 16, spec.height), name,
                    anchor="middle", size=11, cls="col-label")
    canvas.text(left + side / 2, min(top + side + 36, spec.height - 2), "predicted", anchor="middle")
    canvas.text(max(left - 48, 12), top + side / 2, "true", anchor="middle", rotate=True)
    return canvas.finish()


def _unit_axes(spec: PlotSpec) -> _Axes:
    side = min(spec.plot_width, spec.plot_height)
    return _Axes(spec, (0.0, 1.0), (0.0, 1.0), spec.margin_left, spec.margin_top, side, side)


def roc_plot(curves, spec: PlotSpec | None = None, meta: dict | None = None) -> SvgDocument:
    """ROC curves on the unit square with a chance diagonal and AUC legend."""
    spec = spec or PlotSpec(xlabel="false positive rate", ylabel="true positive rate")
    if not curves:
        raise ParameterError("roc_plot needs at least one curve")
    axes = _unit_axes(spec)
    canvas = _Canvas(spec, "roc", meta)
    axes.frame(canvas)
    canvas.add(f'<line class="chance" x1="{fmt(axes.px(0))}" y1="{fmt(axes.py(0))}" '
               f'x2="{fmt(axes.px(1))}" y2="{fmt(axes.py(1))}" stroke="#999999" '
               f'stroke-dasharray="4 4"/>')
    entries = []
    for i, curve in enumerate(curves):
        color = spec.color(i)
        pts = " ".join(f"{fmt(a)},{fmt(b)}" for a, b in zip(axes.px(curve.fpr), axes.py(curve.tpr)))
        canvas.add(f'<polyline class="roc" points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        name = curve.label or (f"class {curve.class_index}" if curve.class_index is not None else "ROC")
        entries.append((color, f"{name}: AUC={curve.auc:.3f}"))
    legend_top = axes.top + axes.h - 8 - 16 * len(entries)
    _legend(canvas, spec, entries, axes.left + axes.w * 0.45, max(legend_top, axes.top))
    return canvas.finish()


def calibration_plot(curves, spec: PlotSpec | None = None, meta: dict | None = None) -> SvgDocument:
    """Reliability diagram; ``curves`` is a list of ``(label, CalibrationCurve)``."""
    spec = spec or PlotSpec(xlabel="mean predicted score", ylabel="observed fraction")
    if not curves:
        raise ParameterError("calibration_plot needs at least one curve")
    axes = _unit_axes(spec)
    canvas = _Canvas(spec, "calibration", meta)
    axes.frame(canvas)
    canvas.add(f'<line class="ideal" x1="{fmt(axes.px(0))}" y1="{fmt(axes.py(0))}" '
               f'x2="{fmt(axes.px(1))}" y2="{fmt(axes.py(1))}" stroke="#999999" '
               f'stroke-dasharray="4 4"/>')
    entries = []
    for i, (name, curve) in enumerate(curves):
        color = spec.color(i)
        occ = curve.occupied
        xs, ys = axes.px(curve.mean_score[occ]), axes.py(curve.observed_fraction[occ])
        if xs.size:
            pts = " ".join(f"{fmt(a)},{fmt(b)}" for a, b in zip(xs, ys))
            canvas.add(f'<polyline class="calibration" points="{pts}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
            for a, b in zip(xs, ys):
                canvas.add(f'<circle cx="{fmt(a)}" cy="{fmt(b)}" r="2.5000" fill="{color}"/>')
        entries.append((color, str(name)))
    _legend(canvas, spec, entries, axes.left + 8, axes.top)
    return canvas.finish()
