"""Brute-force checks of computed sets: exhaustive switching simulation and midpoint convexity."""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage

from src.config import settings
from src.errors import EnumerationBudgetError, ProblemError
from src.services.polylift import Polynomial, max_polynomial

log = logging.getLogger(__name__)

EXIT_TOL = 1e-9
# states held at once while enumerating switching sequences
CHUNK_STATES = 500_000


def grid_points(x_min: Sequence[float], x_max: Sequence[float], resolution: int) -> np.ndarray:
    """Regular grid with `resolution` points per axis; a single point is the box center."""
    if resolution < 1:
        raise ProblemError("Grid resolution must be >= 1")
    lo, hi = np.asarray(x_min, dtype=float), np.asarray(x_max, dtype=float)
    if resolution == 1:
        return ((lo + hi) / 2.0)[None, :]
    axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.shape[0])


@dataclass
class SimulationReport:
    resolution: int
    horizon: int
    margin: float
    inside: int = 0
    outside: int = 0
    boundary: int = 0
    outside_X: int = 0
    outside_skipped: bool = False
    inside_violations: List[List[float]] = field(default_factory=list)
    outside_violations: List[List[float]] = field(default_factory=list)
    components: int = 0
    component_witnesses: List[List[float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.inside_violations and not self.outside_violations

    def to_json(self) -> dict:
        return {
            "resolution": self.resolution,
            "horizon": self.horizon,
            "margin": self.margin,
            "inside": self.inside,
            "outside": self.outside,
            "boundary": self.boundary,
            "outside_X": self.outside_X,
            "outside_skipped": self.outside_skipped,
            "inside_violations": self.inside_violations,
            "outside_violations": self.outside_violations,
            "components": self.components,
            "component_witnesses": self.component_witnesses,
        }


def _exit_within(matrices: Sequence[np.ndarray], constraints: Sequence[Polynomial], x0: np.ndarray, horizon: int) -> np.ndarray:
    """For each start state, whether some switching sequence of length <= horizon leaves X."""
    exited = np.zeros(x0.shape[0], dtype=bool)
    states, owner = x0, np.arange(x0.shape[0])
    for _ in range(horizon):
        if not states.shape[0]:
            break
        states = np.concatenate([states @ A.T for A in matrices], axis=0)
        owner = np.tile(owner, len(matrices))
        out = max_polynomial(constraints, states) > 1.0 + EXIT_TOL
        exited[np.unique(owner[out])] = True
        live = ~exited[owner]
        states, owner = states[live], owner[live]
    return exited


def verify_by_simulation(
    matrices: Sequence[np.ndarray],
    constraints: Sequence[Polynomial],
    description: Sequence[Polynomial],
    x_min: Sequence[float],
    x_max: Sequence[float],
    grid_resolution: int,
    horizon: int,
    margin: float = 1e-3,
) -> SimulationReport:
    """Check a candidate maximal invariant set against every switching sequence.

    Grid points of X strictly inside the candidate must never leave X within
    `horizon` steps; points strictly outside must leave X along some
    sequence. Points within `margin` of the boundary are skipped.
    """
    n = len(x_min)
    if n > 3:
        raise ProblemError("Simulation grids are limited to n <= 3")
    mats = [np.asarray(A, dtype=float) for A in matrices]
    sequences = len(mats) ** max(horizon, 0)
    if sequences > settings.SIM_SEQUENCE_BUDGET:
        raise EnumerationBudgetError(
            f"Horizon {horizon} with {len(mats)} modes needs {sequences} sequences per point, "
            f"budget is {settings.SIM_SEQUENCE_BUDGET}"
        )
    pts = grid_points(x_min, x_max, grid_resolution)
    report = SimulationReport(grid_resolution, horizon, margin)

    in_X = max_polynomial(constraints, pts) <= 1.0
    report.outside_X = int((~in_X).sum())
    pts = pts[in_X]
    value = max_polynomial(description, pts) if pts.shape[0] else np.empty(0)
    inside, outside = pts[value <= 1.0 - margin], pts[value >= 1.0 + margin]
    report.inside, report.outside = inside.shape[0], outside.shape[0]
    report.boundary = pts.shape[0] - report.inside - report.outside

    chunk = max(1, CHUNK_STATES // sequences)
    for start in range(0, inside.shape[0], chunk):
        block = inside[start:start + chunk]
        bad = _exit_within(mats, constraints, block, horizon)
        report.inside_violations.extend(block[bad].tolist())

    if horizon == 0:
        report.outside_skipped = True
    else:
        for start in range(0, outside.shape[0], chunk):
            block = outside[start:start + chunk]
            escaped = _exit_within(mats, constraints, block, horizon)
            report.outside_violations.extend(block[~escaped].tolist())

    components = connected_components(description, x_min, x_max, grid_resolution)
    report.components, report.component_witnesses = components.count, components.witnesses

    log.info(
        f"Simulation: {report.inside} inside, {report.outside} outside, {report.boundary} boundary; "
        f"{len(report.inside_violations)} + {len(report.outside_violations)} violations"
    )
    return report


@dataclass(frozen=True)
class ConvexityReport:
    holds: bool
    pairs: int
    witness: Optional[List[List[float]]] = None

    def __bool__(self) -> bool:
        return self.holds


def convexity_check(
    description: Sequence[Polynomial],
    x_min: Sequence[float],
    x_max: Sequence[float],
    samples: int = 10_000,
    seed: int = 0,
) -> ConvexityReport:
    """Midpoints of random member pairs must be members."""
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(x_min, dtype=float), np.asarray(x_max, dtype=float)
    members = np.empty((0, lo.shape[0]))
    for _ in range(20):
        cand = rng.uniform(lo, hi, size=(max(samples, 100), lo.shape[0]))
        members = np.vstack([members, cand[max_polynomial(description, cand) <= 1.0]])
        if members.shape[0] >= 2 * samples:
            break
    if members.shape[0] < 2:
        return ConvexityReport(True, 0)
    i = rng.integers(0, members.shape[0], size=samples)
    j = rng.integers(0, members.shape[0], size=samples)
    mid = (members[i] + members[j]) / 2.0
    bad = np.flatnonzero(max_polynomial(description, mid) > 1.0 + EXIT_TOL)
    if bad.size:
        k = bad[0]
        return ConvexityReport(False, samples, [members[i[k]].tolist(), members[j[k]].tolist()])
    return ConvexityReport(True, samples)


@dataclass(frozen=True)
class ComponentReport:
    count: int
    witnesses: List[List[float]]


def connected_components(
    description: Sequence[Polynomial], x_min: Sequence[float], x_max: Sequence[float], resolution: int
) -> ComponentReport:
    """Label the member cells of the grid; one witness point per connected component.

    Diagonal neighbours count as connected, so two witnesses always lie in
    pieces separated by at least one non-member grid point.
    """
    n = len(x_min)
    pts = grid_points(x_min, x_max, resolution)
    shape = (resolution,) * n if resolution > 1 else (1,) * n
    members = (max_polynomial(description, pts) <= 1.0).reshape(shape)
    labels, count = ndimage.label(members, structure=ndimage.generate_binary_structure(n, n))
    flat = labels.reshape(-1)
    witnesses = [pts[int(np.flatnonzero(flat == k)[0])].tolist() for k in range(1, count + 1)]
    if count > 1:
        log.info(f"Described set has {count} grid components")
    return ComponentReport(int(count), witnesses)
