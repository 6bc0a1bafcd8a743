"""Minimal deterministic SVG drawing (heatmaps and line charts)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#c0392b", "#2471a3", "#229954", "#8e44ad", "#d68910", "#566573", "#17a589", "#a04000")


def _f(x: float) -> str:
    return f"{x:.2f}"


class Canvas:
    def __init__(self, width: int, height: int):
        self.width, self.height = width, height
        self.items: list[str] = []

    def rect(self, x, y, w, h, fill, stroke="none"):
        self.items.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
                          f'fill="{fill}" stroke="{stroke}"/>')

    def text(self, x, y, s, size=11, anchor="middle", weight="normal", rotate=None):
        tr = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate is not None else ""
        self.items.append(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" text-anchor="{anchor}" '
                          f'font-weight="{weight}" font-family="sans-serif"{tr}>{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, stroke="#999", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                          f'stroke="{stroke}" stroke-width="{width}"{d}/>')

    def polyline(self, pts, stroke, width=1.5, opacity=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        path = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self.items.append(f'<polyline points="{path}" fill="none" stroke="{stroke}" stroke-width="{width}" '
                          f'stroke-opacity="{opacity}"{d}/>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head, f'<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def _colour(v, lo, hi, diverging):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "#eeeeee"
    if diverging:
        m = max(abs(lo), abs(hi)) or 1.0
        t = max(-1.0, min(1.0, v / m))
        if t >= 0:
            r, g, b = 255, int(255 * (1 - t * 0.75)), int(255 * (1 - t * 0.75))
        else:
            r, g, b = int(255 * (1 + t * 0.75)), int(255 * (1 + t * 0.75)), 255
    else:
        t = 0.0 if hi == lo else (v - lo) / (hi - lo)
        r, g, b = 255, int(255 * (1 - 0.7 * t)), int(255 * (1 - 0.9 * t))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(panels, title: str, diverging: bool = False) -> str:
    """``panels``: list of ``(panel_title, row_labels, col_labels, values, labels)``."""
    cw, ch, left, top = 70, 34, 60, 60
    widths = [left + cw * len(p[2]) + 20 for p in panels]
    height = top + max(ch * len(p[1]) for p in panels) + 50
    cv = Canvas(sum(widths) + 10, height)
    cv.text(cv.width / 2, 22, title, size=14, weight="bold")
    flat = [v for p in panels for row in p[3] for v in row if v is not None]
    lo, hi = (min(flat), max(flat)) if flat else (0.0, 1.0)
    x0 = 10
    for (ptitle, rows, cols, values, labels), w in zip(panels, widths):
        cv.text(x0 + left + cw * len(cols) / 2, 44, ptitle, size=12, weight="bold")
        for j, col in enumerate(cols):
            cv.text(x0 + left + cw * (j + 0.5), top + ch * len(rows) + 16, col, size=10)
        for i, row in enumerate(rows):
            cv.text(x0 + left - 6, top + ch * (i + 0.6), row, size=11, anchor="end")
            for j in range(len(cols)):
                v = values[i][j]
                cv.rect(x0 + left + cw * j, top + ch * i, cw, ch, _colour(v, lo, hi, diverging), stroke="white")
                cv.text(x0 + left + cw * (j + 0.5), top + ch * (i + 0.6), labels[i][j], size=10)
        x0 += w
    return cv.render()


def line_chart(panels, title: str, x_range, x_label: str = "", y_label: str = "",
               vlines=(), ncols: int = 3) -> str:
    """``panels``: list of ``(panel_title, series)``; a series is ``(label, xs, ys, colour, opacity)``."""
    pw, ph, margin = 300, 200, 45
    nrows = math.ceil(len(panels) / ncols)
    cols = min(ncols, len(panels))
    cv = Canvas(cols * (pw + margin) + margin, nrows * (ph + 2 * margin) + 40)
    cv.text(cv.width / 2, 22, title, size=14, weight="bold")
    xmin, xmax = x_range
    for idx, (ptitle, series) in enumerate(panels):
        ox = margin + (idx % ncols) * (pw + margin)
        oy = 40 + margin + (idx // ncols) * (ph + 2 * margin)
        ymax = max((max(s[2]) for s in series if len(s[2])), default=1.0) or 1.0
        cv.rect(ox, oy, pw, ph, "none", stroke="#333")
        cv.text(ox + pw / 2, oy - 8, ptitle, size=11, weight="bold")
        for xv in vlines:
            if xmin <= xv <= xmax:
                x = ox + (xv - xmin) / (xmax - xmin) * pw
                cv.line(x, oy, x, oy + ph, stroke="#bbbbbb", dash="3,3")
        for tick in range(5):
            xv = xmin + tick * (xmax - xmin) / 4
            cv.text(ox + tick * pw / 4, oy + ph + 14, f"{xv:g}", size=9)
        cv.text(ox + pw / 2, oy + ph + 28, x_label, size=10)
        cv.text(ox - 30, oy + ph / 2, y_label, size=10, rotate=-90)
        for k, (label, xs, ys, colour, opacity) in enumerate(series):
            pts = [(ox + (x - xmin) / (xmax - xmin) * pw, oy + ph - y / ymax * ph * 0.95) for x, y in zip(xs, ys)]
            cv.polyline(pts, colour, opacity=opacity)
            cv.line(ox + pw - 95, oy + 12 + 12 * k, ox + pw - 80, oy + 12 + 12 * k, stroke=colour, width=2)
            cv.text(ox + pw - 76, oy + 15 + 12 * k, label, size=8, anchor="start")
    return cv.render()
