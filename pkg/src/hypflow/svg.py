"""Tiny SVG writer: polylines on a pair of axes, nothing else."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


@dataclass
class Figure:
    width: int = 640
    height: int = 480
    margin: int = 48
    title: str = ""
    xlabel: str = "x"
    ylabel: str = "y"
    lines: list[tuple[np.ndarray, str, float, str]] = field(default_factory=list)

    def polyline(self, xy, color: str | None = None, width: float = 1.5, dash: str = "") -> None:
        xy = np.asarray(xy, float)
        xy = xy[np.all(np.isfinite(xy), axis=1)]
        if len(xy) < 2:
            return
        color = color or PALETTE[len(self.lines) % len(PALETTE)]
        self.lines.append((xy, color, width, dash))

    def _bounds(self):
        pts = np.vstack([ln[0] for ln in self.lines]) if self.lines else np.array([[0.0, 0.0], [1.0, 1.0]])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = 0.05 * np.maximum(hi - lo, 1e-9)
        return lo - pad, hi + pad

    def render(self) -> str:
        lo, hi = self._bounds()
        m = self.margin
        w, h = self.width - 2 * m, self.height - 2 * m

        def tx(p):
            return m + (p[:, 0] - lo[0]) / (hi[0] - lo[0]) * w, m + h - (p[:, 1] - lo[1]) / (hi[1] - lo[1]) * h

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">',
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
            f'<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="black" stroke-width="1"/>',
        ]
        for frac in np.linspace(0.0, 1.0, 5):
            xv = lo[0] + frac * (hi[0] - lo[0])
            yv = lo[1] + frac * (hi[1] - lo[1])
            px, py = m + frac * w, m + h - frac * h
            out.append(f'<text x="{px:.1f}" y="{m + h + 16}" font-size="10" text-anchor="middle">{xv:.3g}</text>')
            out.append(f'<text x="{m - 6}" y="{py + 3:.1f}" font-size="10" text-anchor="end">{yv:.3g}</text>')
        out.append(f'<text x="{m + w / 2}" y="{self.height - 8}" font-size="12" text-anchor="middle">{self.xlabel}</text>')
        out.append(f'<text x="12" y="{m + h / 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 12 {m + h / 2})">{self.ylabel}</text>')
        if self.title:
            out.append(f'<text x="{self.width / 2}" y="{m / 2}" font-size="14" text-anchor="middle">{self.title}</text>')
        for xy, color, width, dash in self.lines:
            px, py = tx(xy)
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.render())
        return path


def plot_curves(curves: Sequence, path: str | Path, **kwargs) -> Path:
    fig = Figure(**kwargs)
    for c in curves:
        fig.polyline(c)
    return fig.save(path)
