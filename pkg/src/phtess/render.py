"""SVG pictures of planar tessellations."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .combinatorics import canonical_type

# fill colour by vertex count; anything larger shares the last entry
_PALETTE = ["#d73027", "#fc8d59", "#fee090", "#e0f3f8", "#91bfdb", "#4575b4", "#313695"]
_WINDOW_FILL = "#eeeeee"


def _fill(cell):
    if cell.touches_window:
        return _WINDOW_FILL
    k = min(cell.n_vertices - 3, len(_PALETTE) - 1)
    return _PALETTE[k]


def _ordered(cell):
    """Polygon vertices in boundary order, following shared facets."""
    V = cell.vertices
    adj = {v: [] for v in range(len(V))}
    for f in cell.incidence:
        a, b = f[0], f[1]
        adj[a].append(b)
        adj[b].append(a)
    order = [0]
    prev = None
    while len(order) < len(V):
        cur = order[-1]
        nxt = [w for w in adj[cur] if w != prev and w not in order]
        if not nxt:
            break
        prev = cur
        order.append(nxt[0])
    return V[order]


def render_svg(cells, radius, size=600, stroke=0.6, title=None):
    """SVG 1.1 document for the planar ``cells`` inside ``[-radius, radius]^2``."""
    s = size / (2.0 * radius)

    def pt(p):
        return f"{(p[0] + radius) * s:.3f},{(radius - p[1]) * s:.3f}"

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    for cell in cells:
        if cell.dimension != 2:
            raise ValueError("only planar tessellations can be rendered")
        pts = " ".join(pt(p) for p in _ordered(cell))
        name = "window" if cell.touches_window else (canonical_type(cell).name or "other")
        out.append(f'<polygon points="{pts}" fill="{_fill(cell)}" stroke="#000000" '
                   f'stroke-width="{stroke}" class="{escape(name)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
