"""
Half-space polyhedra {y : A y <= b} in the lifted space and the LP-backed set
operations used by the invariant-set iterations: pre-image, intersection,
redundancy removal, containment and equality on a box.
"""
from __future__ import annotations
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from src.config import settings
from src.errors import LPSolverError, ProblemError

log = logging.getLogger(__name__)

# Row provenance tags
CONSTRAINT = "constraint"
BOX = "box"
ADDED = "added"


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, slots=True)
class LPOutcome:
    status: LPStatus
    objective: Optional[float] = None
    point: Optional[np.ndarray] = None


def solve_lp(
    c: np.ndarray,
    A_ub: np.ndarray,
    b_ub: np.ndarray,
    *,
    maximize: bool = False,
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    bounds=(None, None),
) -> LPOutcome:
    """Thin wrapper over scipy's HiGHS interface.

    Solver failures raise LPSolverError; only the three LP verdicts come back
    as statuses. HiGHS presolve may report "infeasible" for unbounded
    problems, so infeasibility is confirmed with a zero-objective solve.
    """
    c = np.asarray(c, dtype=float)
    sign = -1.0 if maximize else 1.0
    kwargs = dict(A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method=settings.LP_METHOD, options=settings.LINPROG_OPTIONS)
    res = linprog(sign * c, **kwargs)
    if res.status == 0:
        return LPOutcome(LPStatus.OPTIMAL, float(sign * res.fun), np.asarray(res.x))
    if res.status == 3:
        return LPOutcome(LPStatus.UNBOUNDED)
    if res.status == 2:
        feasibility = linprog(np.zeros_like(c), **kwargs)
        if feasibility.status == 0:
            log.debug("LP reported infeasible but a feasible point exists; classifying as unbounded")
            return LPOutcome(LPStatus.UNBOUNDED)
        if feasibility.status == 2:
            return LPOutcome(LPStatus.INFEASIBLE)
        res = feasibility
    raise LPSolverError(f"LP solver failed (status {res.status}): {res.message}")


@dataclass(frozen=True)
class HPolyhedron:
    """{y in R^N : A y <= b}; `origin` tags every row with its provenance."""

    A: np.ndarray
    b: np.ndarray
    origin: Tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        A = np.array(self.A, dtype=float, ndmin=2)
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.shape[0] < 1:
            raise ProblemError("A polyhedron needs at least one row")
        if A.shape[0] != b.shape[0]:
            raise ProblemError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        origin = tuple(self.origin) if self.origin is not None else (CONSTRAINT,) * A.shape[0]
        if len(origin) != A.shape[0]:
            raise ProblemError("Provenance tags must match the row count")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def rows(self) -> int:
        return self.A.shape[0]

    def subset(self, idx: Sequence[int]) -> "HPolyhedron":
        idx = list(idx)
        return HPolyhedron(self.A[idx], self.b[idx], tuple(self.origin[i] for i in idx))

    def has_unit_rhs(self) -> bool:
        return bool(np.allclose(self.b, 1.0, rtol=0.0, atol=1e-12))

    def normalized(self) -> "HPolyhedron":
        """Scale every row to right-hand side 1 (needs b > 0)."""
        if np.any(self.b <= 0):
            bad = int(np.argmin(self.b))
            raise ProblemError(f"Row {bad} has right-hand side {self.b[bad]:g}; cannot normalize to 1")
        return HPolyhedron(self.A / self.b[:, None], np.ones(self.rows), self.origin)

    def to_json(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist(), "origin": list(self.origin)}


@dataclass(frozen=True)
class Box:
    """{y : lo <= y <= hi}."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ProblemError("Box bounds have different lengths")
        if np.any(lo >= hi):
            raise ProblemError("Box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains_origin_interior(self) -> bool:
        return bool(np.all(self.lo < 0) and np.all(self.hi > 0))

    def as_polyhedron(self) -> HPolyhedron:
        eye = np.eye(self.dim)
        return HPolyhedron(np.vstack([eye, -eye]), np.concatenate([self.hi, -self.lo]), (BOX,) * (2 * self.dim))

    def to_json(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


def _as_polyhedron(S: HPolyhedron | Box) -> HPolyhedron:
    return S.as_polyhedron() if isinstance(S, Box) else S


def _same_dim(P: HPolyhedron, Q: HPolyhedron) -> None:
    if P.dim != Q.dim:
        raise ProblemError(f"Dimension mismatch: R^{P.dim} vs R^{Q.dim}")


def support(P: HPolyhedron, c: np.ndarray) -> LPOutcome:
    """max c^T y over P."""
    c = np.asarray(c, dtype=float)
    if c.shape != (P.dim,):
        raise ProblemError(f"Direction has shape {c.shape}, polyhedron lives in R^{P.dim}")
    return solve_lp(c, P.A, P.b, maximize=True)


def preimage(P: HPolyhedron, sys) -> HPolyhedron:
    """{y : G A_j y <= 1 for all modes j}, rows stacked mode by mode."""
    if not P.has_unit_rhs():
        raise ProblemError("Pre-image needs a unit right-hand side; normalize the polyhedron first")
    matrices = getattr(sys, "lifted", sys)
    blocks, rhs, origin = [], [], []
    tags = tuple(BOX if t == BOX else ADDED for t in P.origin)
    for Aj in matrices:
        Aj = np.asarray(Aj, dtype=float)
        if Aj.shape != (P.dim, P.dim):
            raise ProblemError(f"Lifted matrix has shape {Aj.shape}, polyhedron lives in R^{P.dim}")
        blocks.append(P.A @ Aj)
        rhs.append(P.b)
        origin.extend(tags)
    return HPolyhedron(np.vstack(blocks), np.concatenate(rhs), tuple(origin))


def intersect(P: HPolyhedron, Q: HPolyhedron | Box) -> HPolyhedron:
    Q = _as_polyhedron(Q)
    _same_dim(P, Q)
    return HPolyhedron(np.vstack([P.A, Q.A]), np.concatenate([P.b, Q.b]), P.origin + Q.origin)


@dataclass(frozen=True, slots=True)
class RowTest:
    """Outcome of one redundancy LP; `rest_empty` flags that the other rows describe an empty set."""

    redundant: bool
    rest_empty: bool = False

    def __bool__(self) -> bool:
        return self.redundant


def _row_redundant(A: np.ndarray, b: np.ndarray, j: int, others: np.ndarray) -> RowTest:
    out = solve_lp(A[j], A[others], b[others], maximize=True)
    if out.status is LPStatus.UNBOUNDED:
        return RowTest(False)
    if out.status is LPStatus.INFEASIBLE:
        return RowTest(True, rest_empty=True)
    return RowTest(bool(out.objective <= b[j] + settings.REDUNDANCY_TOL))


def is_redundant(P: HPolyhedron, j: int) -> RowTest:
    """Row j is redundant when dropping it leaves the set unchanged (ties count as redundant).

    Over an empty remainder every row is redundant; the result says so in
    `rest_empty` so the caller can tell an empty set from a real implication.
    """
    if P.rows < 2:
        raise ProblemError("Redundancy test needs at least two rows")
    if not 0 <= j < P.rows:
        raise ProblemError(f"Row index {j} out of range")
    others = np.array([i for i in range(P.rows) if i != j])
    return _row_redundant(P.A, P.b, j, others)


def remove_redundancy(P: HPolyhedron) -> HPolyhedron:
    """Drop redundant rows one LP at a time, scanning first to last."""
    keep = np.ones(P.rows, dtype=bool)
    for j in range(P.rows):
        if keep.sum() < 2:
            break
        keep[j] = False
        others = np.flatnonzero(keep)
        test = _row_redundant(P.A, P.b, j, others)
        if test.rest_empty:
            log.warning(f"Rows kept besides {j} describe an empty set; the polyhedron is empty")
        if not test.redundant:
            keep[j] = True
    reduced = P.subset(np.flatnonzero(keep))
    log.debug(f"Redundancy removal: {P.rows} -> {reduced.rows} rows")
    if settings.DEBUG_CHECKS and not (contains(P, reduced) and contains(reduced, P)):
        raise LPSolverError("Redundancy removal changed the set")
    return reduced


@dataclass(frozen=True, slots=True)
class ContainmentReport:
    holds: bool
    vacuous: bool = False
    worst_row: Optional[int] = None
    worst_excess: float = float("-inf")
    lp_solves: int = 0


def containment(P: HPolyhedron, Q: HPolyhedron, rows: Sequence[int] | None = None) -> ContainmentReport:
    """Check Q subset of P by maximizing each (selected) row of P over Q."""
    _same_dim(P, Q)
    idx = list(range(P.rows)) if rows is None else list(rows)
    if not idx:
        return ContainmentReport(True)

    def excess(i: int) -> Tuple[int, LPOutcome]:
        return i, support(Q, P.A[i])

    worst_row, worst = None, float("-inf")
    solves = 0
    if settings.LP_WORKERS > 1:
        with ThreadPoolExecutor(max_workers=settings.LP_WORKERS) as pool:
            outcomes = list(pool.map(excess, idx))
    else:
        outcomes = []
        for i in idx:
            outcomes.append(excess(i))
            status = outcomes[-1][1].status
            if status is LPStatus.UNBOUNDED or status is LPStatus.INFEASIBLE:
                break
            if outcomes[-1][1].objective - P.b[i] > settings.CONTAINMENT_TOL:
                break
    for i, out in outcomes:
        solves += 1
        if out.status is LPStatus.INFEASIBLE:
            log.info("Containment test against an empty set: vacuously true")
            return ContainmentReport(True, vacuous=True, lp_solves=solves)
        if out.status is LPStatus.UNBOUNDED:
            return ContainmentReport(False, worst_row=i, worst_excess=float("inf"), lp_solves=solves)
        gap = float(out.objective - P.b[i])
        if gap > worst:
            worst_row, worst = i, gap
    return ContainmentReport(
        bool(worst <= settings.CONTAINMENT_TOL), worst_row=worst_row, worst_excess=float(worst), lp_solves=solves
    )


def contains(P: HPolyhedron, Q: HPolyhedron) -> bool:
    """True iff Q is a subset of P."""
    return containment(P, Q).holds


def contains_on(P: HPolyhedron, Q: HPolyhedron, B: HPolyhedron | Box) -> ContainmentReport:
    """Q n B subset of P n B, checking only the rows of P."""
    return containment(P, intersect(Q, B))


def equal_on(P: HPolyhedron, Q: HPolyhedron, B: HPolyhedron | Box) -> bool:
    """P n B == Q n B (mutual containment of bounded sets)."""
    return contains_on(P, Q, B).holds and contains_on(Q, P, B).holds


