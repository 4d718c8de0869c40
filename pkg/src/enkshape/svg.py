"""Minimal self-contained SVG charts (no plotting dependency).

Two figure kinds cover everything the experiment harness emits: semi-log
misfit-versus-iteration line charts and equal-aspect landmark-shape overlays.
Figures are built with ``xml.etree.ElementTree``, so the output is well-formed
XML by construction.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.etree import ElementTree as ET

import numpy as np

__all__ = ["line_chart", "shape_overlay", "hstack", "to_string", "write"]

SVG_NS = "http://www.w3.org/2000/svg"

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)

_MARGIN = {"left": 64.0, "right": 14.0, "top": 30.0, "bottom": 44.0}


def _svg_root(width: float, height: float) -> ET.Element:
    return ET.Element(
        "svg",
        xmlns=SVG_NS,
        width=str(width),
        height=str(height),
        viewBox=f"0 0 {width} {height}",
    )


def _text(parent, x, y, content, *, size=11, anchor="middle", rotate=None):
    attrib = {
        "x": f"{x:.2f}",
        "y": f"{y:.2f}",
        "font-size": str(size),
        "font-family": "sans-serif",
        "text-anchor": anchor,
        "fill": "#222222",
    }
    if rotate is not None:
        attrib["transform"] = f"rotate({rotate} {x:.2f} {y:.2f})"
    node = ET.SubElement(parent, "text", attrib)
    node.text = str(content)
    return node


def _linear_ticks(lo: float, hi: float, target: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    power = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * power:
            step = mult * power
            break
    first = math.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(value) < 1e-12 * step else value)
        value += step
    return ticks


def _fmt_tick(value: float) -> str:
    if value == 0:
        return "0"
    if abs(value) >= 1e4 or abs(value) < 1e-3:
        return f"{value:.1e}"
    text = f"{value:.4g}"
    return text


def line_chart(series, *, title="", x_label="", y_label="", log_y=False,
               width=480, height=360, show_legend=True) -> ET.Element:
    """Build a line chart as an ``<svg>`` element.

    Parameters
    ----------
    series : sequence of (label, x, y)
        One polyline per entry; ``label=None`` suppresses the legend entry.
    log_y : bool
        Plot ``log10(y)``; non-positive samples are dropped from the line.
    """
    prepared = []
    for index, (label, xs, ys) in enumerate(series):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if log_y:
            keep = ys > 0
            xs, ys = xs[keep], np.log10(ys[keep])
        if xs.size:
            prepared.append((label, xs, ys, PALETTE[index % len(PALETTE)]))
    root = _svg_root(width, height)
    ET.SubElement(root, "rect", x="0", y="0", width=str(width), height=str(height),
                  fill="#ffffff")
    plot_w = width - _MARGIN["left"] - _MARGIN["right"]
    plot_h = height - _MARGIN["top"] - _MARGIN["bottom"]
    x0, y0 = _MARGIN["left"], _MARGIN["top"]
    if title:
        _text(root, width / 2, 18, title, size=13)

    if not prepared:
        _text(root, width / 2, height / 2, "no data")
        return root

    lo_x = min(float(xs.min()) for _, xs, _, _ in prepared)
    hi_x = max(float(xs.max()) for _, xs, _, _ in prepared)
    lo_y = min(float(ys.min()) for _, _, ys, _ in prepared)
    hi_y = max(float(ys.max()) for _, _, ys, _ in prepared)
    if hi_x == lo_x:
        hi_x = lo_x + 1.0
    if hi_y == lo_y:
        hi_y += 0.5
        lo_y -= 0.5

    def sx(v):
        return x0 + (v - lo_x) / (hi_x - lo_x) * plot_w

    def sy(v):
        return y0 + plot_h - (v - lo_y) / (hi_y - lo_y) * plot_h

    axes = ET.SubElement(root, "g")
    ET.SubElement(axes, "rect", x=f"{x0:.2f}", y=f"{y0:.2f}", width=f"{plot_w:.2f}",
                  height=f"{plot_h:.2f}", fill="none", stroke="#444444",
                  attrib={"stroke-width": "1"})
    if log_y:
        first = math.ceil(lo_y)
        y_ticks = [t for t in range(first, math.floor(hi_y) + 1)]
        if not y_ticks:
            y_ticks = [lo_y, hi_y]
    else:
        y_ticks = _linear_ticks(lo_y, hi_y)
    for tick in y_ticks:
        py = sy(tick)
        ET.SubElement(axes, "line", x1=f"{x0 - 4:.2f}", y1=f"{py:.2f}",
                      x2=f"{x0:.2f}", y2=f"{py:.2f}", stroke="#444444")
        ET.SubElement(axes, "line", x1=f"{x0:.2f}", y1=f"{py:.2f}",
                      x2=f"{x0 + plot_w:.2f}", y2=f"{py:.2f}", stroke="#e0e0e0")
        label = f"1e{int(tick)}" if log_y else _fmt_tick(tick)
        _text(axes, x0 - 7, py + 3.5, label, size=10, anchor="end")
    for tick in _linear_ticks(lo_x, hi_x):
        px = sx(tick)
        ET.SubElement(axes, "line", x1=f"{px:.2f}", y1=f"{y0 + plot_h:.2f}",
                      x2=f"{px:.2f}", y2=f"{y0 + plot_h + 4:.2f}", stroke="#444444")
        _text(axes, px, y0 + plot_h + 16, _fmt_tick(tick), size=10)
    if x_label:
        _text(root, x0 + plot_w / 2, height - 8, x_label)
    if y_label:
        _text(root, 16, y0 + plot_h / 2, y_label, rotate=-90)

    lines = ET.SubElement(root, "g", fill="none", attrib={"stroke-width": "1.4"})
    for label, xs, ys, color in prepared:
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        ET.SubElement(lines, "polyline", points=points, stroke=color)

    if show_legend:
        entries = [(label, color) for label, _, _, color in prepared if label]
        legend = ET.SubElement(root, "g")
        for row, (label, color) in enumerate(entries[:10]):
            ly = y0 + 12 + 14 * row
            ET.SubElement(legend, "line", x1=f"{x0 + plot_w - 58:.2f}", y1=f"{ly:.2f}",
                          x2=f"{x0 + plot_w - 40:.2f}", y2=f"{ly:.2f}", stroke=color,
                          attrib={"stroke-width": "2"})
            _text(legend, x0 + plot_w - 36, ly + 3.5, label, size=10, anchor="start")
    return root


def shape_overlay(shapes, *, title="", close=True, width=420, height=360) -> ET.Element:
    """Equal-aspect overlay of landmark shapes.

    Parameters
    ----------
    shapes : sequence of (label, points)
        ``points`` is an ``(M, 2)`` array; landmarks are joined by straight
        segments in index order (closed into a loop when ``close`` is true)
        and marked with dots.
    """
    root = _svg_root(width, height)
    ET.SubElement(root, "rect", x="0", y="0", width=str(width), height=str(height),
                  fill="#ffffff")
    if title:
        _text(root, width / 2, 18, title, size=13)
    arrays = [(label, np.asarray(pts, dtype=float)) for label, pts in shapes]
    if not arrays:
        _text(root, width / 2, height / 2, "no shapes")
        return root
    stacked = np.vstack([pts for _, pts in arrays])
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.06 * float(span.max())
    lo, hi = lo - pad, hi + pad
    plot_w = width - 24.0
    plot_h = height - 54.0
    scale = min(plot_w / (hi[0] - lo[0]), plot_h / (hi[1] - lo[1]))
    cx = 12.0 + (plot_w - scale * (hi[0] - lo[0])) / 2
    cy = 30.0 + (plot_h - scale * (hi[1] - lo[1])) / 2

    def project(pts):
        px = cx + (pts[:, 0] - lo[0]) * scale
        py = cy + (hi[1] - pts[:, 1]) * scale  # flip: SVG y grows downwards
        return px, py

    for index, (label, pts) in enumerate(arrays):
        color = PALETTE[index % len(PALETTE)]
        px, py = project(pts)
        xs = np.append(px, px[0]) if close and len(px) > 2 else px
        ys = np.append(py, py[0]) if close and len(py) > 2 else py
        group = ET.SubElement(root, "g", stroke=color, fill="none",
                              attrib={"stroke-width": "1.4"})
        ET.SubElement(group, "polyline",
                      points=" ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys)))
        for x, y in zip(px, py):
            ET.SubElement(group, "circle", cx=f"{x:.2f}", cy=f"{y:.2f}", r="2",
                          fill=color, stroke="none")
        ly = 40.0 + 14 * index
        ET.SubElement(root, "line", x1="24", y1=f"{ly:.2f}", x2="42", y2=f"{ly:.2f}",
                      stroke=color, attrib={"stroke-width": "2"})
        _text(root, 46, ly + 3.5, label, size=10, anchor="start")
    return root


def hstack(panels) -> ET.Element:
    """Compose panels side by side into one figure (nested ``<svg>``)."""
    panels = list(panels)
    widths = [float(panel.get("width")) for panel in panels]
    height = max(float(panel.get("height")) for panel in panels)
    root = _svg_root(sum(widths), height)
    offset = 0.0
    for panel, panel_width in zip(panels, widths):
        panel.set("x", str(offset))
        root.append(panel)
        offset += panel_width
    return root


def to_string(element: ET.Element) -> str:
    """Serialise an element to an SVG document string."""
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(
        element, encoding="unicode"
    )


def write(path, element: ET.Element) -> Path:
    """Write an element as an ``.svg`` file and return the path."""
    path = Path(path)
    path.write_text(to_string(element))
    return path
