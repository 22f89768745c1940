"""Deterministic static SVG charts (no plotting backend involved)."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from .clades import CladeCut, Dendrogram

PALETTE = ("#2ca02c", "#1f77b4", "#d62728", "#17becf", "#9467bd", "#bcbd22",
           "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")
FONT = 'font-family="sans-serif" font-size="11"'


def _f(x: float) -> str:
    return f"{x:.2f}"


def _svg(width: float, height: float, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
            f'viewBox="0 0 {_f(width)} {_f(height)}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def hbar_chart(labels: Sequence[str], values: Sequence[float], title: str,
               value_labels: Sequence[str] | None = None, vmax: float | None = None) -> str:
    """Horizontal bars, one per label, drawn top to bottom in the given order."""
    if len(values) != len(labels) or (value_labels is not None and len(value_labels) != len(labels)):
        raise ValueError("labels, values and value_labels must have equal lengths")
    bar_h, gap, left, right, top = 18, 6, 260, 80, 34
    width = left + 360 + right
    height = top + len(labels) * (bar_h + gap) + 10
    vmax = vmax or max([abs(v) for v in values] + [1e-12])
    value_labels = value_labels or [f"{v:g}" for v in values]
    body = [f'<text x="{_f(width / 2)}" y="20" text-anchor="middle" {FONT} font-weight="bold">{escape(title)}</text>']
    for i, (lab, v, vl) in enumerate(zip(labels, values, value_labels)):
        y = top + i * (bar_h + gap)
        w = 360 * max(v, 0.0) / vmax
        body.append(f'<text x="{left - 6}" y="{_f(y + bar_h * 0.7)}" text-anchor="end" {FONT}>{escape(lab)}</text>')
        body.append(f'<rect x="{left}" y="{_f(y)}" width="{_f(w)}" height="{bar_h}" fill="{PALETTE[1]}"/>')
        body.append(f'<text x="{_f(left + w + 4)}" y="{_f(y + bar_h * 0.7)}" {FONT}>{escape(vl)}</text>')
    return _svg(width, height, body)


def line_chart(series: Mapping[str, Sequence[int]], x_labels: Sequence[str], title: str) -> str:
    """One polyline per named series over shared x positions."""
    left, right, top, bottom = 50, 150, 34, 50
    pw, ph = 600, 240
    width, height = left + pw + right, top + ph + bottom
    ymax = max([max(v, default=0) for v in series.values()] + [1])
    n = max(len(x_labels), 1)

    def px(i: int) -> float:
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def py(v: float) -> float:
        return top + ph - ph * v / ymax

    body = [f'<text x="{_f(width / 2)}" y="20" text-anchor="middle" {FONT} font-weight="bold">{escape(title)}</text>',
            f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
            f'<text x="{left - 6}" y="{_f(py(ymax) + 4)}" text-anchor="end" {FONT}>{ymax}</text>',
            f'<text x="{left - 6}" y="{_f(py(0) + 4)}" text-anchor="end" {FONT}>0</text>']
    step = max(1, n // 8)
    for i in range(0, len(x_labels), step):
        body.append(f'<text x="{_f(px(i))}" y="{top + ph + 16}" text-anchor="middle" {FONT}>{escape(x_labels[i])}</text>')
    for k, (name, values) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(px(i))},{_f(py(v))}" for i, v in enumerate(values))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 * k + 8
        body.append(f'<rect x="{left + pw + 10}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        body.append(f'<text x="{left + pw + 24}" y="{ly + 1}" {FONT}>{escape(name)}</text>')
    return _svg(width, height, body)


def dendrogram_chart(d: Dendrogram, leaf_names: Mapping[int, str], cut: CladeCut | None = None,
                     title: str = "Ward dendrogram of topic centroids") -> str:
    """Horizontal dendrogram; leaves colored by clade when a cut is given."""
    L = d.n_leaves
    order = d.leaf_order()
    row_h, left, top, pw = 20, 260, 34, 420
    width, height = left + pw + 40, top + L * row_h + 30
    hmax = max([m.distance for m in d.merges] + [1e-12])
    clade_of = cut.clade_of() if cut else {}
    y_of = {leaf: top + (i + 0.5) * row_h for i, leaf in enumerate(order)}
    x_of = {leaf: float(left) for leaf in range(L)}

    def color(topic_id: int) -> str:
        c = clade_of.get(topic_id)
        return "black" if c is None else PALETTE[c % len(PALETTE)]

    body = [f'<text x="{_f(width / 2)}" y="20" text-anchor="middle" {FONT} font-weight="bold">{escape(title)}</text>']
    for leaf in order:
        tid = d.leaves[leaf]
        body.append(f'<text x="{left - 6}" y="{_f(y_of[leaf] + 4)}" text-anchor="end" {FONT} '
                    f'fill="{color(tid)}">{escape(leaf_names.get(tid, str(tid)))}</text>')
    members = {leaf: {d.leaves[leaf]} for leaf in range(L)}
    for step, m in enumerate(d.merges):
        node = L + step
        x = left + pw * m.distance / hmax
        ya, yb = y_of[m.left], y_of[m.right]
        members[node] = members[m.left] | members[m.right]
        clades = {clade_of.get(t) for t in members[node]}
        stroke = color(next(iter(members[node]))) if cut and len(clades) == 1 else "#555555"
        for child, y in ((m.left, ya), (m.right, yb)):
            body.append(f'<line x1="{_f(x_of[child])}" y1="{_f(y)}" x2="{_f(x)}" y2="{_f(y)}" stroke="{stroke}"/>')
        body.append(f'<line x1="{_f(x)}" y1="{_f(ya)}" x2="{_f(x)}" y2="{_f(yb)}" stroke="{stroke}"/>')
        x_of[node], y_of[node] = x, (ya + yb) / 2
    if cut and cut.threshold is not None:
        xc = left + pw * min(cut.threshold, hmax) / hmax
        body.append(f'<line x1="{_f(xc)}" y1="{top}" x2="{_f(xc)}" y2="{top + L * row_h}" '
                    f'stroke="#999999" stroke-dasharray="4,3"/>')
    return _svg(width, height, body)
