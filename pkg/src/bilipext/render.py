"""SVG pictures of how a planar map bends a square grid."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import BilipError
from .maps import MapExpr, evaluate

SAMPLES = 200


@dataclass
class RenderSpec:
    pitch: float
    viewport: tuple  # (x0, y0, x1, y1)
    width: int = 800
    stroke: str = "#1f4e79"
    stroke_width: float = 0.8
    arrow: str = "#b22222"

    def __post_init__(self):
        if not self.pitch > 0:
            raise BilipError("pitch must be positive")
        x0, y0, x1, y1 = map(float, self.viewport)
        if not (x1 > x0 and y1 > y0):
            raise BilipError("empty viewport")
        self.viewport = (x0, y0, x1, y1)


def gridlines(spec: RenderSpec):
    """Sampled horizontal and vertical gridlines (each an (SAMPLES, 2) array)."""
    x0, y0, x1, y1 = spec.viewport
    p = spec.pitch
    lines = []
    t = np.linspace(0.0, 1.0, SAMPLES)
    for k in range(math.ceil(y0 / p - 1e-9), math.floor(y1 / p + 1e-9) + 1):
        lines.append(("h", k * p, np.c_[x0 + t * (x1 - x0), np.full(SAMPLES, k * p)]))
    for k in range(math.ceil(x0 / p - 1e-9), math.floor(x1 / p + 1e-9) + 1):
        lines.append(("v", k * p, np.c_[np.full(SAMPLES, k * p), y0 + t * (y1 - y0)]))
    return lines


def render_grid(m: MapExpr, spec: RenderSpec, designated=None) -> str:
    """SVG document with the images of the gridlines and source-to-image arrows."""
    if m.dim != 2:
        raise BilipError("rendering needs a planar map")
    x0, y0, x1, y1 = spec.viewport
    scale = spec.width / (x1 - x0)
    height = int(round((y1 - y0) * scale))

    def px(P):
        return (P[:, 0] - x0) * scale, (y1 - P[:, 1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{spec.width}" height="{height}" '
           f'viewBox="0 0 {spec.width} {height}">',
           '<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
           f'<path d="M0,0 L6,3 L0,6 z" fill="{spec.arrow}"/></marker></defs>',
           f'<g fill="none" stroke="{spec.stroke}" stroke-width="{spec.stroke_width}">']
    for axis, level, P in gridlines(spec):
        X, Y = px(evaluate(m, P))
        pts = " ".join(f"{a:.6f},{b:.6f}" for a, b in zip(X, Y))
        out.append(f'<polyline data-axis="{axis}" data-level="{level:.6f}" points="{pts}"/>')
    out.append("</g>")
    if designated is not None:
        src, img = designated
        S = np.asarray(src, dtype=float).reshape(-1, 2)
        I = np.asarray(img, dtype=float).reshape(-1, 2)
        sx, sy = px(S)
        ix, iy = px(I)
        out.append(f'<g stroke="{spec.arrow}" stroke-width="{spec.stroke_width}">')
        for a, b, c, e in zip(sx, sy, ix, iy):
            out.append(f'<line x1="{a:.6f}" y1="{b:.6f}" x2="{c:.6f}" y2="{e:.6f}" marker-end="url(#head)"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def parse_polylines(svg: str):
    """Recover ``(axis, level, points)`` from a rendered document (pixel coordinates)."""
    import xml.etree.ElementTree as ET

    root = ET.fromstring(svg)
    res = []
    for el in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pts = np.array([[float(v) for v in p.split(",")] for p in el.get("points").split()])
        res.append((el.get("data-axis"), float(el.get("data-level")), pts))
    return res
