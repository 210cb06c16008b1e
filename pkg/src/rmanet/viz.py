"""SVG overlays of attended regions on raster images.

The raster is emitted as one 1x1 rect per pixel (keeps the file dependency
free and byte-deterministic); region boxes draw on top with a distinct stroke
color per iteration index.
"""

import numpy as np

REGION_COLORS = (
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
    "#a65628", "#f781bf", "#17becf", "#999999",
)


def _to_uint8_hwc(image):
    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[0] == 3 and arr.dtype != np.uint8:
        arr = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    return arr


def render_overlay(image, boxes, scale=8):
    """SVG string: the image pixels with one outlined rect per region box."""
    pixels = _to_uint8_hwc(image)
    h, w, _ = pixels.shape
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * scale}" height="{h * scale}" '
        f'viewBox="0 0 {w} {h}" shape-rendering="crispEdges">'
    ]
    for y in range(h):
        for x in range(w):
            r, g, b = pixels[y, x]
            parts.append(f'<rect x="{x}" y="{y}" width="1" height="1" fill="#{r:02x}{g:02x}{b:02x}"/>')
    for i, (x0, y0, x1, y1) in enumerate(boxes):
        color = REGION_COLORS[i % len(REGION_COLORS)]
        parts.append(
            f'<rect x="{x0:.3f}" y="{y0:.3f}" width="{max(x1 - x0, 0):.3f}" height="{max(y1 - y0, 0):.3f}" '
            f'fill="none" stroke="{color}" stroke-width="0.4"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def transforms_csv(transforms):
    """CSV of per-iteration transform parameters."""
    rows = ["k,sx,sy,tx,ty"]
    for k, p in enumerate(transforms, start=1):
        rows.append(f"{k},{p.sx:.6f},{p.sy:.6f},{p.tx:.6f},{p.ty:.6f}")
    return "\n".join(rows) + "\n"
