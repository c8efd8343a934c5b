"""Static SVG overlays of wireframes on their images, and PR-curve plots."""

from __future__ import annotations

import base64
import io as _io
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np
from PIL import Image

from hawp.errors import IoFailure, ShapeMismatch
from hawp.geometry import Wireframe

SEGMENT_COLOR = "#ff8c00"
JUNCTION_COLOR = "#00bfff"


def _png_base64(image: np.ndarray) -> str:
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img * 255.0 if img.max(initial=0) <= 1.0 else img), 0, 255).astype(np.uint8)
    buf = _io.BytesIO()
    # fixed PNG settings keep the bytes stable for identical input
    Image.fromarray(img).save(buf, format="PNG", optimize=False, compress_level=6)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _num(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def overlay_svg(image: np.ndarray | None, wf: Wireframe, junction_radius: float = 2.0,
                stroke_width: float = 1.5) -> str:
    """SVG text: embedded raster, one ``<polyline>`` per segment, one ``<circle>`` per junction."""
    if image is not None:
        h, w = np.asarray(image).shape[:2]
        if (w, h) != (wf.width, wf.height):
            raise ShapeMismatch(f"image is {w}x{h} but the wireframe is {wf.width}x{wf.height}")
    w, h = wf.width, wf.height
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
    ]
    if image is not None:
        parts.append(f'<image x="0" y="0" width="{w}" height="{h}" '
                     f'href="data:image/png;base64,{_png_base64(image)}"/>')
    parts.append(f'<g fill="none" stroke={quoteattr(SEGMENT_COLOR)} stroke-width="{_num(stroke_width)}">')
    for s in wf.segments:
        pts = f"{_num(s.x1.x)},{_num(s.x1.y)} {_num(s.x2.x)},{_num(s.x2.y)}"
        parts.append(f'<polyline points="{pts}" stroke-opacity="{_num(max(0.2, min(1.0, s.score)))}"/>')
    parts.append("</g>")
    parts.append(f'<g fill={quoteattr(JUNCTION_COLOR)}>')
    for p, _ in wf.junctions:
        parts.append(f'<circle cx="{_num(p.x)}" cy="{_num(p.y)}" r="{_num(junction_radius)}"/>')
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write(text: str, path) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def plot_overlay(image, wireframe: Wireframe, out_svg) -> None:
    _write(overlay_svg(image, wireframe), out_svg)


def pr_curve_svg(curves: dict, size: int = 320) -> str:
    """Recall/precision plot; ``curves`` maps a label to an object with ``recall`` and ``precision``."""
    pad = 30
    span = size - 2 * pad
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="#444"/>',
        f'<text x="{size / 2}" y="{size - 6}" font-size="11" text-anchor="middle">recall</text>',
        f'<text x="10" y="{size / 2}" font-size="11" transform="rotate(-90 10 {size / 2})" '
        'text-anchor="middle">precision</text>',
    ]
    for k, (label, c) in enumerate(curves.items()):
        xs = pad + span * np.asarray(c.recall, dtype=np.float64)
        ys = pad + span * (1.0 - np.asarray(c.precision, dtype=np.float64))
        pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(xs, ys))
        color = colors[k % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{pad + 6}" y="{pad + 14 + 13 * k}" font-size="11" fill="{color}">'
                     f'{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
