from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
from scipy import sparse

from src.config import settings
from src.errors import AssumptionError, EnumerationBudgetError, LPSolverError, ProblemError, SDPSolverError
from src.services.polylift import Exponent, Polynomial, monomials_up_to
from src.services.polyhedra import LPStatus, solve_lp

log = logging.getLogger(__name__)

Verdict = Literal["invariant", "unknown", "not-applicable"]


@dataclass(frozen=True)
class InvarianceCertificate:
    verdict: Verdict
    epsilon: Optional[float] = None
    H: Tuple[np.ndarray, ...] = ()
    residual: Optional[float] = None

    def to_json(self, include_matrices: bool = False) -> dict:
        out = {"verdict": self.verdict, "epsilon": self.epsilon, "residual": self.residual}
        if include_matrices:
            out["H"] = [h.tolist() for h in self.H]
        return out


def check_invariance(G: np.ndarray, sys) -> InvarianceCertificate:
    """Find H_i >= 0 with G A_i = H_i G and H_i 1 <= eps 1, minimizing eps.

    Variables are vec(H_1), ..., vec(H_M) (row-major) followed by eps.
    A feasible eps <= 1 certifies invariance of {y : G y <= 1}; an
    infeasible LP proves nothing about the original set.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    matrices = [np.asarray(A, dtype=float) for A in getattr(sys, "lifted", sys)]
    p, N = G.shape
    for A in matrices:
        if A.shape != (N, N):
            raise ProblemError(f"Lifted matrix has shape {A.shape}, G has {N} columns")
    M = len(matrices)
    block = p * p
    nvar = M * block + 1

    eq_block = sparse.kron(sparse.eye(p), sparse.csr_matrix(G.T))
    ub_block = sparse.kron(sparse.eye(p), sparse.csr_matrix(np.ones((1, p))))
    A_eq = sparse.block_diag([eq_block] * M, format="csr")
    A_eq = sparse.hstack([A_eq, sparse.csr_matrix((A_eq.shape[0], 1))], format="csr")
    b_eq = np.concatenate([(G @ A).reshape(-1) for A in matrices])
    A_ub = sparse.block_diag([ub_block] * M, format="csr")
    A_ub = sparse.hstack([A_ub, -np.ones((A_ub.shape[0], 1))], format="csr")
    b_ub = np.zeros(A_ub.shape[0])

    c = np.zeros(nvar)
    c[-1] = 1.0
    out = solve_lp(c, A_ub, b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None))
    if out.status is not LPStatus.OPTIMAL:
        log.info(f"Invariance LP {out.status.value}: no certificate")
        return InvarianceCertificate("unknown")

    H = tuple(np.clip(out.point[k * block:(k + 1) * block].reshape(p, p), 0.0, None) for k in range(M))
    epsilon = float(out.point[-1])
    residual = max(float(np.max(np.abs(G @ A - Hk @ G))) for A, Hk in zip(matrices, H))
    scale = max(1.0, max(float(np.max(np.abs(G @ A))) for A in matrices))
    if residual > 1e-8 * scale:
        raise LPSolverError(f"Invariance certificate fails re-verification (residual {residual:.3g})")
    epsilon = max(epsilon, max(float(np.max(Hk.sum(axis=1))) for Hk in H))
    verdict: Verdict = "invariant" if epsilon <= 1.0 + settings.LP_FEASIBILITY_TOL else "unknown"
    log.info(f"Invariance LP: eps={epsilon:.6g}, verdict={verdict}")
    return InvarianceCertificate(verdict, epsilon, H, residual)


@dataclass(frozen=True, slots=True)
class SpectralBounds:
    lower: float
    upper: float
    depth: int
    lower_at_depth: float
    upper_at_depth: float

    def to_json(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "depth": self.depth,
            "lower_at_depth": self.lower_at_depth,
            "upper_at_depth": self.upper_at_depth,
        }


def _as_stack(matrices) -> np.ndarray:
    mats = np.asarray([np.asarray(A, dtype=float) for A in getattr(matrices, "lifted", matrices)])
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[0] < 1:
        raise ProblemError("Expected a non-empty list of square matrices of equal size")
    return mats


def _product_levels(mats: np.ndarray, depth: int) -> Iterator[Tuple[int, float, float]]:
    """Yield (k, max rho(P)^(1/k), max ||P||_2^(1/k)) over all products of length k."""
    prods = mats
    for k in range(1, depth + 1):
        if k > 1:
            prods = np.matmul(prods[:, None], mats[None]).reshape(-1, *mats.shape[1:])
        rho = float(np.max(np.abs(np.linalg.eigvals(prods))))
        norm = float(np.max(np.linalg.norm(prods, ord=2, axis=(1, 2))))
        yield k, rho ** (1.0 / k), norm ** (1.0 / k)


def _check_budget(M: int, depth: int) -> None:
    total = sum(M ** k for k in range(1, depth + 1))
    if total > settings.JSR_PRODUCT_BUDGET:
        raise EnumerationBudgetError(
            f"Depth {depth} needs {total} products, budget is {settings.JSR_PRODUCT_BUDGET}"
        )


def jsr_bounds(matrices, depth: int) -> SpectralBounds:
    """Brute-force JSR bracket from every product of length 1..depth."""
    if depth < 1:
        raise ProblemError("JSR depth must be >= 1")
    mats = _as_stack(matrices)
    _check_budget(mats.shape[0], depth)
    lower, upper = 0.0, float("inf")
    lo_t = up_t = 0.0
    for _, lo_t, up_t in _product_levels(mats, depth):
        lower = max(lower, lo_t)
        upper = min(upper, up_t)
    return SpectralBounds(lower, upper, depth, lo_t, up_t)


def certify_stability(matrices, max_depth: int | None = None, override: bool = False) -> SpectralBounds:
    """Raise the product length until the upper bound drops below 1."""
    max_depth = max_depth or settings.JSR_MAX_DEPTH
    mats = _as_stack(matrices)
    M = mats.shape[0]
    while max_depth > 1 and sum(M ** k for k in range(1, max_depth + 1)) > settings.JSR_PRODUCT_BUDGET:
        max_depth -= 1
    lower, upper = 0.0, float("inf")
    bounds = None
    for k, lo_t, up_t in _product_levels(mats, max_depth):
        lower, upper = max(lower, lo_t), min(upper, up_t)
        bounds = SpectralBounds(lower, upper, k, lo_t, up_t)
        if upper < 1.0 or lower >= 1.0:
            break
    log.info(f"Stability gate: {bounds.lower:.6g} <= JSR <= {bounds.upper:.6g} (depth {bounds.depth})")
    if bounds.upper < 1.0:
        return bounds
    msg = f"JSR upper bound {bounds.upper:.6g} is not below 1 at depth {bounds.depth}"
    if override:
        log.warning(f"{msg}; continuing because the stability gate is overridden")
        return bounds
    raise AssumptionError(msg, bounds=bounds)


@dataclass(frozen=True)
class SOSBound:
    """min eps such that eps - target = s0 + sum_i s_i (1 - c_i), s_k SOS."""

    epsilon: Optional[float]
    status: str
    grams: Tuple[np.ndarray, ...] = ()
    residual: Optional[float] = None
    min_eigenvalue: Optional[float] = None
    verified: bool = False


def _gram_polynomial(n: int, basis: Sequence[Exponent], Q: np.ndarray) -> Polynomial:
    terms = []
    for a, za in enumerate(basis):
        for b, zb in enumerate(basis):
            terms.append((tuple(x + y for x, y in zip(za, zb)), Q[a, b]))
    return Polynomial.from_terms(n, terms)


def _coefficient_maps(
    n: int, gram_basis: Sequence[Exponent], weight: Polynomial, index: Dict[Exponent, int]
) -> Dict[int, np.ndarray]:
    """For each target monomial, the matrix W with coeff = sum(W * Q) of weight * z^T Q z."""
    m = len(gram_basis)
    maps: Dict[int, np.ndarray] = {}
    for a, za in enumerate(gram_basis):
        for b, zb in enumerate(gram_basis):
            for alpha, c in weight.terms:
                gamma = tuple(x + y + z for x, y, z in zip(za, zb, alpha))
                k = index.get(gamma)
                if k is None:
                    continue
                maps.setdefault(k, np.zeros((m, m)))[a, b] += c
    return maps


def _solve_sdp(problem: cp.Problem) -> None:
    try:
        problem.solve(solver=settings.SDP_SOLVER, verbose=settings.SDP_VERBOSE)
        return
    except cp.error.SolverError as exc:
        failure = exc
    fallback = settings.SDP_FALLBACK_SOLVER
    if not fallback or fallback == settings.SDP_SOLVER:
        raise SDPSolverError(f"SDP solver {settings.SDP_SOLVER} failed: {failure}") from failure
    log.info(f"SDP solver {settings.SDP_SOLVER} failed ({failure}); retrying with {fallback}")
    try:
        problem.solve(solver=fallback, verbose=settings.SDP_VERBOSE)
    except cp.error.SolverError as exc:
        raise SDPSolverError(f"SDP solvers {settings.SDP_SOLVER} and {fallback} failed: {exc}") from exc


def sos_bound(
    premises: Sequence[Polynomial],
    target: Polynomial,
    degree: int | None = None,
    multiplier_degree: int | None = None,
) -> SOSBound:
    """Upper bound on max target(x) over {x : c_i(x) <= 1} via a Putinar certificate.

    With `multiplier_degree` set, every s_i for i >= 1 has that degree and
    the certificate degree grows to fit it; otherwise the s_i fill up `degree`.
    """
    n = target.n
    d = max([target.degree] + [p.degree for p in premises])
    if multiplier_degree is not None:
        if multiplier_degree < 0 or multiplier_degree % 2:
            raise ProblemError(f"Multiplier degree must be even and >= 0, got {multiplier_degree}")
        d = max([d] + [multiplier_degree + p.degree for p in premises])
    D = max(degree or 0, d)
    D += D % 2
    monos = monomials_up_to(n, D)
    index = {alpha: k for k, alpha in enumerate(monos)}

    one = Polynomial.constant(n, 1.0)
    weights = [one] + [one - c for c in premises]
    bases: List[Tuple[Exponent, ...]] = []
    for i, w in enumerate(weights):
        half = (D - max(w.degree, 0)) // 2
        if i and multiplier_degree is not None:
            half = min(half, multiplier_degree // 2)
        bases.append(monomials_up_to(n, half) if half >= 0 else ())

    eps = cp.Variable()
    grams = [cp.Variable((len(b), len(b)), symmetric=True) if b else None for b in bases]
    expr: Dict[int, list] = {}
    for Q, basis, w in zip(grams, bases, weights):
        if Q is None:
            continue
        for k, W in _coefficient_maps(n, basis, w, index).items():
            expr.setdefault(k, []).append(cp.sum(cp.multiply(W, Q)))

    rhs = {index[alpha]: -c for alpha, c in target.terms}
    zero = index[(0,) * n]
    constraints = [Q >> 0 for Q in grams if Q is not None]
    for k in range(len(monos)):
        lhs = (eps if k == zero else 0.0) + rhs.get(k, 0.0)
        terms = expr.get(k)
        if terms:
            constraints.append(cp.sum(cp.hstack(terms)) == lhs)
        elif k == zero:
            constraints.append(eps + rhs.get(k, 0.0) == 0.0)
        elif abs(rhs.get(k, 0.0)) > 0.0:
            return SOSBound(None, "infeasible")

    problem = cp.Problem(cp.Minimize(eps), constraints)
    _solve_sdp(problem)
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or eps.value is None:
        log.debug(f"SOS program status {problem.status}")
        return SOSBound(None, str(problem.status))

    epsilon = float(eps.value)
    values = tuple(0.5 * (Q.value + Q.value.T) if Q is not None else np.zeros((0, 0)) for Q in grams)
    min_eig = min((float(np.min(np.linalg.eigvalsh(V))) for V in values if V.size), default=0.0)
    identity = Polynomial.constant(n, epsilon) - target
    for V, basis, w in zip(values, bases, weights):
        if V.size:
            identity = identity - w * _gram_polynomial(n, basis, V)
    residual = identity.max_abs_coefficient()
    verified = min_eig >= -settings.PSD_TOL and residual <= settings.SOS_RESIDUAL_TOL
    if not verified:
        log.warning(f"SOS certificate rejected: min eigenvalue {min_eig:.3g}, residual {residual:.3g}")
    return SOSBound(epsilon, str(problem.status), values, residual, min_eig, verified)


@dataclass(frozen=True)
class RedundancyCertificate:
    j: int
    verdict: Literal["redundant", "inconclusive", "duplicate"]
    epsilon_star: Optional[float]
    multiplier_degree: int
    gram_matrices: Tuple[np.ndarray, ...] = ()
    residual: Optional[float] = None

    @property
    def redundant(self) -> bool:
        return self.verdict != "inconclusive"

    def to_json(self, include_matrices: bool = False) -> dict:
        out = {
            "j": self.j,
            "verdict": self.verdict,
            "epsilon_star": self.epsilon_star,
            "multiplier_degree": self.multiplier_degree,
            "residual": self.residual,
        }
        if include_matrices:
            out["gram_matrices"] = [g.tolist() for g in self.gram_matrices]
        return out


def sos_redundancy(polys: Sequence[Polynomial], j: int, degree: int | None = None) -> RedundancyCertificate:
    """Certify that c_j(x) <= 1 follows from the other constraints.

    Multipliers start as constants; their degree rises by two while the
    certificate degree stays within `degree` (default: the largest
    constraint degree). Solver failures count as inconclusive.
    """
    if not 0 <= j < len(polys):
        raise ProblemError(f"Constraint index {j} out of range")
    others = [p for i, p in enumerate(polys) if i != j]
    target = polys[j]
    cap = max(degree or 0, max(p.degree for p in polys))
    top = max((p.degree for p in others), default=0)
    m = 0
    while True:
        try:
            bound = sos_bound(others, target, multiplier_degree=m)
        except SDPSolverError as exc:
            log.warning(f"SOS test of row {j} at multiplier degree {m} failed: {exc}")
            bound = SOSBound(None, "solver_error")
        if bound.verified and bound.epsilon is not None and bound.epsilon < 1.0 - settings.SOS_MARGIN:
            log.debug(f"SOS redundancy of row {j}: eps*={bound.epsilon:.8g} with multipliers of degree {m}")
            return RedundancyCertificate(j, "redundant", bound.epsilon, m, bound.grams, bound.residual)
        step = max(target.degree, m + 2 + top)
        if not others or step + step % 2 > cap:
            break
        m += 2
    epsilon = bound.epsilon if bound.verified else None
    return RedundancyCertificate(j, "inconclusive", epsilon, m, bound.grams, bound.residual)


def _same_polynomial(p: Polynomial, q: Polynomial) -> bool:
    keys = set(p.coefficients()) | set(q.coefficients())
    return all(abs(p.coefficient(k) - q.coefficient(k)) <= settings.COEFF_PRUNE_TOL * 1e3 for k in keys)


@dataclass
class ReductionOutcome:
    kept: List[int] = field(default_factory=list)
    certificates: List[RedundancyCertificate] = field(default_factory=list)


def minimal_semialgebraic(polys: Sequence[Polynomial], degree: int | None = None) -> ReductionOutcome:
    """Drop every constraint certified redundant by the others, first to last.

    A row that failed earlier keeps failing after later removals (fewer
    premises never lower eps*), so one forward scan equals rescanning.
    """
    outcome = ReductionOutcome()
    alive = list(range(len(polys)))
    for j in list(alive):
        if len(alive) < 2:
            break
        pos = alive.index(j)
        if any(_same_polynomial(polys[j], polys[i]) for i in alive if i != j):
            alive.pop(pos)
            outcome.certificates.append(RedundancyCertificate(j, "duplicate", 1.0, 0))
            continue
        current = [polys[i] for i in alive]
        cert = sos_redundancy(current, pos, degree)
        cert = RedundancyCertificate(j, cert.verdict, cert.epsilon_star, cert.multiplier_degree,
                                     cert.gram_matrices, cert.residual)
        outcome.certificates.append(cert)
        if cert.redundant:
            alive.pop(pos)
    outcome.kept = alive
    log.info(f"SOS reduction: {len(polys)} -> {len(alive)} polynomials")
    return outcome
