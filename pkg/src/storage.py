from __future__ import annotations
import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src import __version__
from src.config import settings
from src.errors import ProblemError, ResultMismatchError
from src.services.engine import InvariantSetResult, RunOptions, SemiAlgebraicSet, SwitchedSystem
from src.services.polylift import Polynomial

log = logging.getLogger(__name__)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Term(Strict):
    exponents: List[int]
    coeff: float


class Constraint(Strict):
    terms: List[Term] = Field(min_length=1)
    rhs: float = 1.0


class StateBox(Strict):
    x_min: List[float]
    x_max: List[float]


class Tolerances(Strict):
    redundancy: Optional[float] = Field(None, gt=0)
    containment: Optional[float] = Field(None, gt=0)
    lp_feasibility: Optional[float] = Field(None, gt=0)
    sos_margin: Optional[float] = Field(None, gt=0)
    sos_residual: Optional[float] = Field(None, gt=0)
    psd: Optional[float] = Field(None, gt=0)

    def apply(self) -> None:
        """Override the matching settings for this process."""
        mapping = {
            "redundancy": "REDUNDANCY_TOL",
            "containment": "CONTAINMENT_TOL",
            "lp_feasibility": "LP_FEASIBILITY_TOL",
            "sos_margin": "SOS_MARGIN",
            "sos_residual": "SOS_RESIDUAL_TOL",
            "psd": "PSD_TOL",
        }
        for key, name in mapping.items():
            value = getattr(self, key)
            if value is not None:
                setattr(settings, name, value)
                log.debug(f"{name} set to {value} from the problem file")


class Options(Strict):
    algorithm: Literal[1, 2, 3] = 2
    max_iter: Optional[int] = Field(None, ge=1)
    sos_degree: Optional[int] = Field(None, ge=0)
    delta: Optional[float] = Field(None, gt=0)
    jsr_depth: Optional[int] = Field(None, ge=1)
    sos_reduce: bool = True
    tolerances: Tolerances = Field(default_factory=Tolerances)


class ProblemFile(Strict):
    n: int = Field(ge=1)
    matrices: List[List[List[float]]] = Field(min_length=1)
    constraints: List[Constraint] = Field(min_length=1)
    state_box: Optional[StateBox] = None
    options: Options = Field(default_factory=Options)

    @model_validator(mode="after")
    def _shapes(self) -> "ProblemFile":
        for k, A in enumerate(self.matrices):
            if len(A) != self.n or any(len(row) != self.n for row in A):
                raise ValueError(f"matrix {k} is not {self.n}x{self.n}")
        for k, c in enumerate(self.constraints):
            for t in c.terms:
                if len(t.exponents) != self.n or any(e < 0 for e in t.exponents):
                    raise ValueError(f"constraint {k} has exponents {t.exponents}, expected {self.n} non-negative ints")
        if self.state_box is not None:
            if len(self.state_box.x_min) != self.n or len(self.state_box.x_max) != self.n:
                raise ValueError(f"state_box bounds must have length {self.n}")
        return self

    def digest(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class BasisInfo(Strict):
    n: int
    degrees: List[int]
    N: int
    coordinates: List[str]


class PolyhedronData(Strict):
    A: List[List[float]]
    b: List[float]
    origin: List[str]


class BoxData(Strict):
    lo: List[float]
    hi: List[float]


class LoweredPolynomial(Strict):
    terms: List[Term]
    origin: str
    kept: bool = True


class ResultFile(Strict):
    version: str
    problem_digest: str
    problem: ProblemFile
    algorithm: int
    iterations: int
    basis: BasisInfo
    fixed_point: PolyhedronData
    box: Optional[BoxData] = None
    polynomials: List[LoweredPolynomial]
    spectral: Optional[Dict[str, float]] = None
    certificates: List[dict] = Field(default_factory=list)
    trace: List[dict]
    timings: Dict[str, float]

    def check_problem(self, problem: ProblemFile) -> None:
        if problem.digest() != self.problem_digest:
            raise ResultMismatchError("Result file was produced from a different problem file")


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemError(f"Cannot read {path}: {exc}") from exc


def load_problem(path: str | Path) -> ProblemFile:
    try:
        return ProblemFile.model_validate_json(_read(path))
    except ValidationError as exc:
        raise ProblemError(f"Invalid problem file {path}:\n{exc}") from exc


def load_result(path: str | Path) -> ResultFile:
    try:
        return ResultFile.model_validate_json(_read(path))
    except ValidationError as exc:
        raise ProblemError(f"Invalid result file {path}:\n{exc}") from exc


def save(model: BaseModel, path: str | Path) -> None:
    Path(path).write_text(model.model_dump_json(indent=2), encoding="utf-8")
    log.info(f"Wrote {path}")


def _poly(n: int, terms: List[Term]) -> Polynomial:
    return Polynomial.from_terms(n, ((t.exponents, t.coeff) for t in terms), tol=settings.COEFF_PRUNE_TOL)


def to_system(problem: ProblemFile) -> SwitchedSystem:
    return SwitchedSystem(tuple(problem.matrices))


def to_constraint_set(problem: ProblemFile) -> SemiAlgebraicSet:
    polys = [_poly(problem.n, c.terms) for c in problem.constraints]
    return SemiAlgebraicSet.from_constraints(polys, [c.rhs for c in problem.constraints])


def run_options(problem: ProblemFile, **overrides) -> RunOptions:
    """Problem-file options, with non-None command-line overrides on top."""
    opts = problem.options
    values = {
        "algorithm": opts.algorithm,
        "max_iter": opts.max_iter,
        "sos_degree": opts.sos_degree,
        "delta": opts.delta,
        "jsr_depth": opts.jsr_depth,
        "sos_reduce": opts.sos_reduce,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunOptions(**{k: v for k, v in values.items() if v is not None})


def result_to_file(result: InvariantSetResult, problem: ProblemFile, include_matrices: bool = False) -> ResultFile:
    kept = set(result.reduced_indices) if result.reduced_indices is not None else None
    polys = [
        LoweredPolynomial(
            terms=[Term(exponents=list(a), coeff=c) for a, c in p.terms],
            origin=origin,
            kept=kept is None or k in kept,
        )
        for k, (p, origin) in enumerate(zip(result.polynomials, result.origins))
    ]
    basis = result.basis
    return ResultFile(
        version=__version__,
        problem_digest=problem.digest(),
        problem=problem,
        algorithm=result.algorithm,
        iterations=result.iterations,
        basis=BasisInfo(n=basis.n, degrees=list(basis.degrees), N=basis.N, coordinates=basis.describe()),
        fixed_point=PolyhedronData(**result.fixed_point.to_json()),
        box=BoxData(**result.box.to_json()) if result.box is not None else None,
        polynomials=polys,
        spectral=result.spectral.to_json() if result.spectral is not None else None,
        certificates=[c.to_json(include_matrices) for c in result.certificates],
        trace=[r.to_json() for r in result.trace],
        timings=dict(result.timings),
    )


def described_set(result: ResultFile, reduced: bool = True):
    """Lowered polynomials of a result file with their provenance tags."""
    n = result.problem.n
    return [
        (_poly(n, p.terms), p.origin, p.kept)
        for p in result.polynomials
        if p.kept or not reduced
    ]
