from __future__ import annotations
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from src.errors import ProblemError
from src.services.polylift import Polynomial, max_polynomial
from src.services.simulation import grid_points

log = logging.getLogger(__name__)

MEMBER_TOL = 1e-9
SVG_SIZE = 600

# stroke colour per curve style
STYLES = {
    "inherited": ("#000000", ""),
    "added": ("#d62728", ""),
    "redundant": ("#9a9a9a", ""),
    "box": ("#1f77b4", ' stroke-dasharray="6,4"'),
}


@dataclass(frozen=True)
class GridSample:
    points: np.ndarray
    values: np.ndarray
    members: np.ndarray

    @property
    def rows(self) -> int:
        return self.points.shape[0]


def sample_grid(
    description: Sequence[Polynomial], x_min: Sequence[float], x_max: Sequence[float], resolution: int
) -> GridSample:
    """
    Evaluate the max-polynomial of a description on a regular grid.

    Args:
        description: Polynomials c_i; the set is {x : max_i c_i(x) <= 1}
        x_min, x_max: Grid bounds
        resolution: Points per axis (1 gives the box center only)

    Returns:
        GridSample with points, max values and membership flags
    """
    n = len(x_min)
    if n not in (2, 3):
        raise ProblemError(f"Grids are exported for n in {{2, 3}}, got n={n}")
    pts = grid_points(x_min, x_max, resolution)
    if description:
        values = max_polynomial(description, pts)
    else:
        values = np.full(pts.shape[0], np.inf)
    return GridSample(pts, values, values <= 1.0 + MEMBER_TOL)


def write_csv(sample: GridSample, path: str | Path) -> None:
    n = sample.points.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(n)] + ["max_c", "member"])
        for x, v, m in zip(sample.points, sample.values, sample.members):
            writer.writerow([f"{c:.10g}" for c in x] + [f"{v:.10g}", int(m)])
    log.info(f"Wrote {sample.rows} grid rows to {path}")


def curve_style(origin: str, kept: bool) -> str:
    if origin == "constraint":
        return "inherited"
    if origin == "box":
        return "box"
    return "added" if kept else "redundant"


def level_segments(
    poly: Polynomial, x_min: Sequence[float], x_max: Sequence[float], resolution: int, level: float = 1.0
) -> List[Tuple[Tuple[float, float], Tuple[float, float]]]:
    """Marching squares for {poly = level} on a 2-D grid; returns line segments."""
    xs = np.linspace(x_min[0], x_max[0], resolution)
    ys = np.linspace(x_min[1], x_max[1], resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    F = poly.evaluate(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape) - level
    above = F > 0
    # cells whose corners do not all agree
    mixed = (above[:-1, :-1] != above[1:, :-1]) | (above[:-1, :-1] != above[:-1, 1:]) | (above[:-1, :-1] != above[1:, 1:])
    segments = []
    for i, j in zip(*np.nonzero(mixed)):
        corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
        hits = []
        for (a, b), (c, d) in zip(corners, corners[1:] + corners[:1]):
            fa, fc = F[a, b], F[c, d]
            if (fa > 0) != (fc > 0):
                t = fa / (fa - fc)
                hits.append((X[a, b] + t * (X[c, d] - X[a, b]), Y[a, b] + t * (Y[c, d] - Y[a, b])))
        for k in range(0, len(hits) - 1, 2):
            segments.append((hits[k], hits[k + 1]))
    return segments


def write_svg(
    curves: Sequence[Tuple[Polynomial, str]],
    sample: GridSample,
    x_min: Sequence[float],
    x_max: Sequence[float],
    path: str | Path,
    resolution: int,
) -> None:
    """
    Membership region plus the unit level curve of every defining polynomial.

    Args:
        curves: (polynomial, style) pairs, style one of STYLES
        sample: 2-D grid sample used for the shaded region
        path: Output file
        resolution: Grid resolution for the level curves
    """
    if sample.points.shape[1] != 2:
        raise ProblemError("SVG export needs n = 2")
    span = np.asarray(x_max, dtype=float) - np.asarray(x_min, dtype=float)

    def px(x: float, y: float) -> Tuple[float, float]:
        return ((x - x_min[0]) / span[0] * SVG_SIZE, SVG_SIZE - (y - x_min[1]) / span[1] * SVG_SIZE)

    cell = SVG_SIZE / max(resolution - 1, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white" stroke="black"/>',
        '<g fill="#cfe3f5" stroke="none">',
    ]
    for (x, y), member in zip(sample.points, sample.members):
        if member:
            cx, cy = px(x, y)
            parts.append(f'<rect x="{cx - cell / 2:.2f}" y="{cy - cell / 2:.2f}" width="{cell:.2f}" height="{cell:.2f}"/>')
    parts.append("</g>")
    for poly, style in curves:
        colour, dash = STYLES[style]
        d = []
        for (x0, y0), (x1, y1) in level_segments(poly, x_min, x_max, resolution):
            a, b = px(x0, y0)
            c, e = px(x1, y1)
            d.append(f"M{a:.2f},{b:.2f}L{c:.2f},{e:.2f}")
        if d:
            parts.append(f'<path class="{style}" d="{"".join(d)}" fill="none" stroke="{colour}" stroke-width="1.5"{dash}/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")
    log.info(f"Wrote {len(curves)} level curves to {path}")
