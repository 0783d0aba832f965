"""Evaluation and speedup figures.

``render_speedup_svg`` writes a self-contained SVG by hand so the report
needs nothing beyond the standard library; ``render_speedup_png`` draws the
same two panels with matplotlib.
"""

from __future__ import annotations

import math
from typing import Dict, List, Mapping, Sequence, Tuple
from xml.sax.saxutils import escape

# problem -> [(proportion, mean actual evaluations, speedup)], sorted by proportion
Aggregates = Mapping[str, Sequence[Tuple[float, float, float]]]

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

PANEL_W, PANEL_H = 420, 320
MARGIN = dict(left=70, right=20, top=40, bottom=50)


def aggregate(rows) -> Dict[str, List[Tuple[float, float, float]]]:
    """Group SweepRows into plot series using the mean over experiments."""
    from .experiments import speedup

    groups: Dict[str, list] = {}
    for row in rows:
        groups.setdefault(row.problem, []).append(row)
    out = {}
    for name, group in groups.items():
        table = speedup(group)
        out[name] = [(p, m, s) for p, (m, s) in sorted(table.items())]
    return out


def _check(aggregates: Aggregates) -> None:
    if not aggregates or not any(len(s) for s in aggregates.values()):
        raise ValueError("nothing to plot")


def _log_ticks(lo: float, hi: float) -> Tuple[float, float, List[float]]:
    a = math.floor(math.log10(lo))
    b = math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return float(a), float(b), [10.0 ** k for k in range(a, b + 1)]


def _linear_ticks(hi: float) -> Tuple[float, List[float]]:
    hi = max(hi, 1.0)
    raw = hi / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    top = step * math.ceil(hi / step)
    return top, [step * k for k in range(int(round(top / step)) + 1)]


def _fmt(v: float) -> str:
    if v >= 1e4 or (0 < v < 1e-2):
        return f"{v:.0e}".replace("e+0", "e").replace("e+", "e")
    return f"{v:g}"


class _Panel:
    def __init__(self, x0: float, title: str, ylabel: str, log: bool, values: List[float]):
        self.x0 = x0
        self.title = title
        self.ylabel = ylabel
        self.log = log
        positive = [v for v in values if v > 0]
        if log:
            lo, hi = (min(positive), max(positive)) if positive else (1.0, 10.0)
            self.ylo, self.yhi, self.ticks = _log_ticks(lo, hi)
        else:
            self.ylo = 0.0
            self.yhi, self.ticks = _linear_ticks(max(values) if values else 1.0)
        self.left = x0 + MARGIN["left"]
        self.right = x0 + PANEL_W - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = PANEL_H - MARGIN["bottom"]

    def x(self, p: float) -> float:
        return self.left + p * (self.right - self.left)

    def y(self, v: float) -> float:
        t = (math.log10(v) if self.log else v) - self.ylo
        return self.bottom - t / (self.yhi - self.ylo) * (self.bottom - self.top)

    def frame(self) -> List[str]:
        out = [f'<rect x="{self.left:.2f}" y="{self.top:.2f}" width="{self.right - self.left:.2f}" '
               f'height="{self.bottom - self.top:.2f}" fill="none" stroke="black"/>',
               f'<text x="{(self.left + self.right) / 2:.2f}" y="{self.top - 14:.2f}" '
               f'text-anchor="middle" font-size="14">{escape(self.title)}</text>',
               f'<text x="{(self.left + self.right) / 2:.2f}" y="{PANEL_H - 12:.2f}" '
               f'text-anchor="middle" font-size="12">proportion of estimated offspring</text>',
               f'<text x="{self.x0 + 16:.2f}" y="{(self.top + self.bottom) / 2:.2f}" text-anchor="middle" '
               f'font-size="12" transform="rotate(-90 {self.x0 + 16:.2f} {(self.top + self.bottom) / 2:.2f})">'
               f'{escape(self.ylabel)}</text>']
        for p in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
            x = self.x(p)
            out.append(f'<line x1="{x:.2f}" y1="{self.bottom:.2f}" x2="{x:.2f}" y2="{self.bottom + 5:.2f}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{self.bottom + 18:.2f}" text-anchor="middle" font-size="11">{p:g}</text>')
        for v in self.ticks:
            y = self.y(v)
            out.append(f'<line x1="{self.left - 5:.2f}" y1="{y:.2f}" x2="{self.left:.2f}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{self.left - 8:.2f}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{_fmt(v)}</text>')
        return out

    def series(self, name: str, color: str, points: List[Tuple[float, float]]) -> List[str]:
        coords = [(self.x(p), self.y(v)) for p, v in points if not self.log or v > 0]
        out = []
        if len(coords) > 1:
            joined = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
            out.append(f'<polyline class="series" data-problem="{escape(name)}" points="{joined}" '
                       f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in coords:
            out.append(f'<circle class="marker" cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>')
        return out


def render_speedup_svg(aggregates: Aggregates, path) -> None:
    """Two panels: mean evaluations (log y) and speedup, both against proportion."""
    _check(aggregates)
    names = sorted(aggregates)
    evals = [m for s in aggregates.values() for _, m, _ in s]
    speeds = [sp for s in aggregates.values() for _, _, sp in s]
    panels = [("evaluations", _Panel(0, "Actual evaluations", "mean actual evaluations", True, evals), 1),
              ("speedup", _Panel(PANEL_W, "Speedup", "speedup", False, speeds), 2)]
    width = 2 * PANEL_W
    height = PANEL_H + 24 * len(names) + 10
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    for key, panel, column in panels:
        lines.append(f'<g class="panel" id="{key}">')
        lines.extend(panel.frame())
        for k, name in enumerate(names):
            pts = [(row[0], row[column]) for row in aggregates[name]]
            lines.extend(panel.series(name, COLORS[k % len(COLORS)], pts))
        lines.append("</g>")
    lines.append('<g class="legend">')
    for k, name in enumerate(names):
        y = PANEL_H + 12 + 24 * k
        color = COLORS[k % len(COLORS)]
        lines.append(f'<line x1="{MARGIN["left"]}" y1="{y}" x2="{MARGIN["left"] + 24}" y2="{y}" '
                     f'stroke="{color}" stroke-width="2"/>')
        lines.append(f'<text x="{MARGIN["left"] + 32}" y="{y + 4}" font-size="12">{escape(name)}</text>')
    lines.append("</g>")
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def render_speedup_png(aggregates: Aggregates, path) -> None:
    """Same two panels as the SVG, drawn with matplotlib."""
    _check(aggregates)
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_e, ax_s) = plt.subplots(1, 2, figsize=(10, 4))
    for k, name in enumerate(sorted(aggregates)):
        series = aggregates[name]
        p = [r[0] for r in series]
        color = COLORS[k % len(COLORS)]
        ax_e.plot(p, [r[1] for r in series], "o-", color=color, label=name, markersize=4)
        ax_s.plot(p, [r[2] for r in series], "o-", color=color, label=name, markersize=4)
    ax_e.set_yscale("log")
    ax_e.set_ylabel("mean actual evaluations")
    ax_s.set_ylabel("speedup")
    for ax in (ax_e, ax_s):
        ax.set_xlabel("proportion of estimated offspring")
        ax.set_xlim(0, 1)
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
