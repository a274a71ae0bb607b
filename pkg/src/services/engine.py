"""
Problem assembly and the invariant-set iterations.

Every algorithm runs the same recursion Z_{i+1} = reduce(pre(Z_i) n S0) in the
lifted space and differs only in S0 and the stop rule:

* algorithm 1: S0 = X^[L]; stop when every row of Z_{i+1} is implied by Z_i
  on the lifted variety (LP first, then an SOS certificate), falling back to
  the box criterion when some row stays undecided.
* algorithm 2: S0 = X^[L]; stop when Z_i n B is contained in Z_{i+1} n B.
* algorithm 3: S0 = B n X^[L] with 0 in the interior of B; same stop rule.

The returned fixed point is Z_i, the set before the step that reproduced it.
"""
from __future__ import annotations
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.errors import BoxValidationError, NonConvergenceError, ProblemError, SDPSolverError
from src.services import polyhedra
from src.services.certificates import (
    RedundancyCertificate,
    SpectralBounds,
    certify_stability,
    minimal_semialgebraic,
    sos_bound,
)
from src.services.polyhedra import BOX, Box, HPolyhedron, LPStatus
from src.services.polylift import (
    LiftBasis,
    LiftedMatrixSet,
    Polynomial,
    decompose_constraints,
    lower_polyhedron,
    lower_row,
    max_polynomial,
    multinomial,
    normalize_constraint,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SwitchedSystem:
    matrices: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        mats = tuple(np.array(A, dtype=float, ndmin=2) for A in self.matrices)
        if not mats:
            raise ProblemError("A switching system needs at least one matrix")
        n = mats[0].shape[0]
        for k, A in enumerate(mats):
            if A.shape != (n, n):
                raise ProblemError(f"Matrix {k} has shape {A.shape}, expected ({n}, {n})")
            A.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def M(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True)
class SemiAlgebraicSet:
    """{x : c_i(x) <= 1}, every c_i with zero constant term."""

    polynomials: Tuple[Polynomial, ...]

    def __post_init__(self) -> None:
        polys = tuple(self.polynomials)
        if not polys:
            raise ProblemError("A constraint set needs at least one polynomial")
        n = polys[0].n
        for k, p in enumerate(polys):
            if p.n != n:
                raise ProblemError(f"Constraint {k} has dimension {p.n}, expected {n}")
            if p.degree < 1:
                raise ProblemError(f"Constraint {k} has degree 0")
        polys = tuple(p if p.constant_term == 0.0 else normalize_constraint(p) for p in polys)
        object.__setattr__(self, "polynomials", polys)

    @classmethod
    def from_constraints(cls, polys: Sequence[Polynomial], rhs: Sequence[float] | None = None) -> "SemiAlgebraicSet":
        rhs = [1.0] * len(polys) if rhs is None else list(rhs)
        if len(rhs) != len(polys):
            raise ProblemError("One right-hand side per constraint")
        return cls(tuple(normalize_constraint(p, r) for p, r in zip(polys, rhs)))

    @property
    def n(self) -> int:
        return self.polynomials[0].n

    def value(self, points: np.ndarray) -> np.ndarray:
        return max_polynomial(self.polynomials, points)

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        return self.value(points) <= 1.0 + tol


@dataclass(frozen=True)
class LiftedProblem:
    basis: LiftBasis
    sys_lifted: LiftedMatrixSet
    X_lifted: HPolyhedron

    @property
    def variety_dim(self) -> int:
        return self.basis.n


def build_lifted_problem(sys: SwitchedSystem, X: SemiAlgebraicSet) -> LiftedProblem:
    if sys.n != X.n:
        raise ProblemError(f"System has dimension {sys.n}, constraints have {X.n}")
    basis, gs = decompose_constraints(X.polynomials)
    lifted = LiftedMatrixSet.build(sys.matrices, basis)
    X_lifted = HPolyhedron(np.vstack(gs), np.ones(len(gs)))
    log.info(f"Lifted problem: L={basis.degrees}, N={basis.N}, {X_lifted.rows} rows, {sys.M} modes")
    return LiftedProblem(basis, lifted, X_lifted)


def _monomial_interval(lo: np.ndarray, hi: np.ndarray, alpha) -> Tuple[float, float]:
    out_lo, out_hi = 1.0, 1.0
    for l, h, e in zip(lo, hi, alpha):
        if e == 0:
            continue
        ends = (l ** e, h ** e)
        if e % 2 == 0 and l < 0 < h:
            f_lo, f_hi = 0.0, max(ends)
        else:
            f_lo, f_hi = min(ends), max(ends)
        prods = (out_lo * f_lo, out_lo * f_hi, out_hi * f_lo, out_hi * f_hi)
        out_lo, out_hi = min(prods), max(prods)
    return out_lo, out_hi


def validate_state_box(X: SemiAlgebraicSet, x_min: np.ndarray, x_max: np.ndarray) -> None:
    """Sample a grid over an enlarged box and reject points of X outside [x_min, x_max]."""
    n = X.n
    per_axis = max(2, int(math.ceil(settings.BOX_VALIDATION_POINTS ** (1.0 / n))))
    scale = settings.BOX_VALIDATION_SCALE
    axes = [np.linspace(scale * a, scale * b, per_axis) for a, b in zip(x_min, x_max)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    inside_X = X.contains(pts, tol=0.0)
    outside_box = np.any((pts < x_min - 1e-12) | (pts > x_max + 1e-12), axis=1)
    bad = np.flatnonzero(inside_X & outside_box)
    if bad.size:
        witness = pts[bad[0]]
        raise BoxValidationError(
            f"Point {witness.tolist()} satisfies every constraint but lies outside the state box", witness
        )


def box_from_state_bounds(
    x_min: Sequence[float],
    x_max: Sequence[float],
    basis: LiftBasis,
    delta: float | None = None,
    X: SemiAlgebraicSet | None = None,
) -> Box:
    """Bound every lifted coordinate over the state box by interval arithmetic.

    With `delta` the lower bounds become min(-delta, lo) so the box has the
    origin in its interior. When `X` is given the state box is validated first.
    """
    x_min = np.asarray(x_min, dtype=float)
    x_max = np.asarray(x_max, dtype=float)
    if x_min.shape != (basis.n,) or x_max.shape != (basis.n,):
        raise ProblemError(f"State bounds must have length {basis.n}")
    if not (np.all(x_min < 0) and np.all(x_max > 0)):
        raise ProblemError("State box must contain the origin in its interior")
    if X is not None:
        validate_state_box(X, x_min, x_max)
    lo, hi = np.empty(basis.N), np.empty(basis.N)
    for k, (_, alpha) in enumerate(basis.coordinates):
        a, b = _monomial_interval(x_min, x_max, alpha)
        s = math.sqrt(multinomial(alpha))
        lo[k], hi[k] = a * s, b * s
    if delta is not None:
        if delta <= 0:
            raise ProblemError("delta must be positive")
        lo = np.minimum(-delta, lo)
    return Box(lo, hi)


@dataclass(frozen=True, slots=True)
class IterationRecord:
    index: int
    rows_before: int
    rows_after: int
    lp_solves: int
    seconds: float
    nested: Optional[bool] = None
    implied_lp: Optional[int] = None
    implied_sos: Optional[int] = None
    undecided: Optional[int] = None
    fallback: bool = False

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__slots__}


@dataclass(frozen=True, slots=True)
class StopCheck:
    converged: bool
    lp_solves: int = 0
    implied_lp: Optional[int] = None
    implied_sos: Optional[int] = None
    undecided: Optional[int] = None
    fallback: bool = False


StopRule = Callable[[HPolyhedron, HPolyhedron], StopCheck]


@dataclass(frozen=True)
class RunOptions:
    algorithm: Literal[1, 2, 3] = 2
    max_iter: int = field(default_factory=lambda: settings.MAX_ITER)
    sos_degree: Optional[int] = None
    delta: float = field(default_factory=lambda: settings.BOX_DELTA)
    jsr_depth: int = field(default_factory=lambda: settings.JSR_MAX_DEPTH)
    skip_gate: bool = False
    sos_reduce: bool = True
    check_nesting: bool = True


@dataclass
class InvariantSetResult:
    algorithm: int
    basis: LiftBasis
    fixed_point: HPolyhedron
    iterations: int
    trace: List[IterationRecord]
    polynomials: List[Polynomial]
    origins: List[str]
    box: Optional[Box] = None
    spectral: Optional[SpectralBounds] = None
    reduced_indices: Optional[List[int]] = None
    certificates: List[RedundancyCertificate] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def reduced_polynomials(self) -> Optional[List[Polynomial]]:
        if self.reduced_indices is None:
            return None
        return [self.polynomials[i] for i in self.reduced_indices]

    @property
    def description(self) -> List[Polynomial]:
        """The smallest available description of the set."""
        return self.reduced_polynomials or self.polynomials

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        return max_polynomial(self.description, points) <= 1.0 + tol


@contextmanager
def _stage(timings: Dict[str, float], name: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def iterate(
    problem: LiftedProblem,
    S0: HPolyhedron,
    stop: StopRule,
    max_iter: int,
    check_nesting: bool = True,
) -> Tuple[HPolyhedron, int, List[IterationRecord]]:
    """Run Z_{i+1} = reduce(pre(Z_i) n S0) from Z_0 = S0 until `stop` fires."""
    if max_iter < 1:
        raise ProblemError("max_iter must be >= 1")
    Z = S0
    trace: List[IterationRecord] = []
    for i in range(1, max_iter + 1):
        t0 = time.perf_counter()
        candidate = polyhedra.intersect(polyhedra.preimage(Z, problem.sys_lifted), S0)
        Z_next = polyhedra.remove_redundancy(candidate)
        lps = candidate.rows
        nested = None
        if check_nesting:
            report = polyhedra.containment(Z, Z_next)
            nested, lps = bool(report.holds), lps + report.lp_solves
            if not nested:
                log.warning(f"Iteration {i}: Z_{i} is not contained in Z_{i - 1} (excess {report.worst_excess:.3g})")
        check = stop(Z, Z_next)
        record = IterationRecord(
            index=i,
            rows_before=candidate.rows,
            rows_after=Z_next.rows,
            lp_solves=lps + check.lp_solves,
            seconds=time.perf_counter() - t0,
            nested=nested,
            implied_lp=check.implied_lp,
            implied_sos=check.implied_sos,
            undecided=check.undecided,
            fallback=bool(check.fallback),
        )
        trace.append(record)
        log.info(
            f"Iteration {i}: {candidate.rows} -> {Z_next.rows} rows, {record.lp_solves} LPs, "
            f"{record.seconds:.2f}s{' (converged)' if check.converged else ''}"
        )
        if check.converged:
            return Z, i, trace
        Z = Z_next
    raise NonConvergenceError(f"No fixed point after {max_iter} iterations", trace)


def box_stop_rule(box: Box) -> StopRule:
    """Z n B == Z_next n B, checked one way since Z_next is a subset of Z."""

    def stop(Z: HPolyhedron, Z_next: HPolyhedron) -> StopCheck:
        report = polyhedra.contains_on(Z_next, Z, box)
        solves = report.lp_solves
        if report.holds and settings.DEBUG_CHECKS:
            reverse = polyhedra.contains_on(Z, Z_next, box)
            solves += reverse.lp_solves
            if not reverse.holds:
                log.warning("Two-sided box check disagrees with the one-sided criterion")
                return StopCheck(False, solves)
        return StopCheck(bool(report.holds), solves)

    return stop


def variety_stop_rule(basis: LiftBasis, sos_degree: int | None, box: Box | None) -> StopRule:
    """Rows of Z_next implied by Z on the lifted variety, by LP or SOS."""
    fallback = box_stop_rule(box) if box is not None else None

    def stop(Z: HPolyhedron, Z_next: HPolyhedron) -> StopCheck:
        premises = lower_polyhedron(Z, basis)
        by_lp = by_sos = undecided = 0
        solves = 0
        for f, b in zip(Z_next.A, Z_next.b):
            out = polyhedra.support(Z, f)
            solves += 1
            if out.status is LPStatus.OPTIMAL and out.objective <= b + settings.CONTAINMENT_TOL:
                by_lp += 1
                continue
            try:
                bound = sos_bound(premises, lower_row(f / b, basis), sos_degree)
            except SDPSolverError as exc:
                log.warning(f"SOS inclusion test failed, row left undecided: {exc}")
                undecided += 1
                continue
            if bound.verified and bound.epsilon is not None and bound.epsilon <= 1.0 + settings.SOS_MARGIN:
                by_sos += 1
            else:
                undecided += 1
        if not undecided:
            return StopCheck(True, solves, by_lp, by_sos, 0)
        if fallback is None:
            return StopCheck(False, solves, by_lp, by_sos, undecided)
        check = fallback(Z, Z_next)
        if check.converged:
            log.info(f"{undecided} rows undecided on the variety; box criterion fired")
        converged = bool(check.converged)
        return StopCheck(converged, solves + check.lp_solves, by_lp, by_sos, undecided, fallback=converged)

    return stop


def _gate(sys: SwitchedSystem, options: RunOptions, timings: Dict[str, float]) -> SpectralBounds:
    with _stage(timings, "gate"):
        return certify_stability(sys.matrices, options.jsr_depth, override=options.skip_gate)


def _finish(
    algorithm: int,
    problem: LiftedProblem,
    Z: HPolyhedron,
    iterations: int,
    trace: List[IterationRecord],
    options: RunOptions,
    timings: Dict[str, float],
    box: Box | None,
    spectral: SpectralBounds,
) -> InvariantSetResult:
    with _stage(timings, "lower"):
        polys = lower_polyhedron(Z, problem.basis)
    result = InvariantSetResult(
        algorithm=algorithm,
        basis=problem.basis,
        fixed_point=Z,
        iterations=iterations,
        trace=trace,
        polynomials=polys,
        origins=list(Z.origin),
        box=box,
        spectral=spectral,
        timings=timings,
    )
    if options.sos_reduce:
        with _stage(timings, "sos"):
            reduction = minimal_semialgebraic(polys, options.sos_degree)
        result.reduced_indices = reduction.kept
        result.certificates = reduction.certificates
    log.info(
        f"Algorithm {algorithm}: {iterations} iterations, {len(polys)} polynomials"
        + (f", {len(result.reduced_indices)} after SOS reduction" if result.reduced_indices is not None else "")
    )
    return result


def run_algorithm1(
    sys: SwitchedSystem, X: SemiAlgebraicSet, options: RunOptions | None = None, box: Box | None = None
) -> InvariantSetResult:
    options = options or RunOptions(algorithm=1)
    timings: Dict[str, float] = {}
    spectral = _gate(sys, options, timings)
    with _stage(timings, "lift"):
        problem = build_lifted_problem(sys, X)
    if box is None:
        log.warning("No box for algorithm 1: undecided variety checks cannot fall back")
    stop = variety_stop_rule(problem.basis, options.sos_degree, box)
    with _stage(timings, "iterate"):
        Z, k, trace = iterate(problem, problem.X_lifted, stop, options.max_iter, options.check_nesting)
    return _finish(1, problem, Z, k, trace, options, timings, box, spectral)


def run_algorithm2(
    sys: SwitchedSystem, X: SemiAlgebraicSet, box: Box, options: RunOptions | None = None
) -> InvariantSetResult:
    options = options or RunOptions(algorithm=2)
    timings: Dict[str, float] = {}
    spectral = _gate(sys, options, timings)
    with _stage(timings, "lift"):
        problem = build_lifted_problem(sys, X)
    if box.dim != problem.basis.N:
        raise ProblemError(f"Box lives in R^{box.dim}, lifted space is R^{problem.basis.N}")
    with _stage(timings, "iterate"):
        Z, k, trace = iterate(problem, problem.X_lifted, box_stop_rule(box), options.max_iter, options.check_nesting)
    return _finish(2, problem, Z, k, trace, options, timings, box, spectral)


def run_algorithm3(
    sys: SwitchedSystem, X: SemiAlgebraicSet, box: Box, options: RunOptions | None = None
) -> InvariantSetResult:
    options = options or RunOptions(algorithm=3)
    if not box.contains_origin_interior():
        raise ProblemError("Algorithm 3 needs a box with the origin in its interior")
    timings: Dict[str, float] = {}
    spectral = _gate(sys, options, timings)
    with _stage(timings, "lift"):
        problem = build_lifted_problem(sys, X)
    if box.dim != problem.basis.N:
        raise ProblemError(f"Box lives in R^{box.dim}, lifted space is R^{problem.basis.N}")
    S0 = polyhedra.intersect(problem.X_lifted, box.as_polyhedron().normalized())
    S0 = polyhedra.remove_redundancy(S0)
    with _stage(timings, "iterate"):
        Z, k, trace = iterate(problem, S0, box_stop_rule(box), options.max_iter, options.check_nesting)
    result = _finish(3, problem, Z, k, trace, options, timings, box, spectral)
    boxed = sum(1 for t in result.origins if t == BOX)
    if boxed:
        log.info(f"{boxed} polynomials of the description come from box facets")
    return result


def solve(
    sys: SwitchedSystem,
    X: SemiAlgebraicSet,
    x_min: Sequence[float] | None,
    x_max: Sequence[float] | None,
    options: RunOptions,
) -> InvariantSetResult:
    """Build the box the chosen algorithm needs and run it."""
    basis, _ = decompose_constraints(X.polynomials)
    box = None
    if x_min is not None and x_max is not None:
        delta = options.delta if options.algorithm == 3 else None
        box = box_from_state_bounds(x_min, x_max, basis, delta=delta, X=X)
    elif options.algorithm in (2, 3):
        raise ProblemError(f"Algorithm {options.algorithm} needs a state box")
    if options.algorithm == 1:
        return run_algorithm1(sys, X, options, box)
    if options.algorithm == 2:
        return run_algorithm2(sys, X, box, options)
    if options.algorithm == 3:
        return run_algorithm3(sys, X, box, options)
    raise ProblemError(f"Unknown algorithm {options.algorithm}")
