"""
Monomial/polynomial algebra and the Veronese lifts of vectors, matrices and
polynomial constraint functions.

Coordinates of the d-lift x^[d] are the monomials x^alpha of degree d scaled
by sqrt(alpha!), where alpha! = d!/(alpha_1!...alpha_n!). The L-lift stacks
the d-lifts for every degree in L in ascending order.

Ordering inside a degree block:
    * degree 1 is the identity embedding, x^[1] = (x_1, ..., x_n);
    * degree >= 2 lists exponent tuples by descending power of the last
      variable, ties broken by descending power of the previous one, e.g.
      x^[2] = (x2^2, sqrt(2) x2 x1, x1^2) for n = 2.
"""
from __future__ import annotations
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import sympy as sp

from src.config import settings
from src.errors import ProblemError

log = logging.getLogger(__name__)

Exponent = Tuple[int, ...]


@lru_cache(maxsize=None)
def multinomial(alpha: Exponent) -> int:
    """Return alpha! = d! / (alpha_1! ... alpha_n!) with d = sum(alpha)."""
    if any(a < 0 for a in alpha):
        raise ProblemError(f"Exponent tuple {alpha} has negative entries")
    result = math.factorial(sum(alpha))
    for a in alpha:
        result //= math.factorial(a)
    return result


@lru_cache(maxsize=None)
def monomials(n: int, degree: int) -> Tuple[Exponent, ...]:
    """All exponent tuples of the given degree, in lift order."""
    if n < 1 or degree < 0:
        raise ProblemError(f"Cannot enumerate monomials for n={n}, degree={degree}")
    exps = []
    for combo in itertools.combinations_with_replacement(range(n), degree):
        alpha = [0] * n
        for i in combo:
            alpha[i] += 1
        exps.append(tuple(alpha))
    if degree == 1:
        return tuple(sorted(exps, reverse=True))
    return tuple(sorted(exps, key=lambda a: a[::-1], reverse=True))


def monomials_up_to(n: int, degree: int) -> Tuple[Exponent, ...]:
    """Every exponent tuple of total degree <= degree, graded ascending."""
    out: List[Exponent] = []
    for d in range(degree + 1):
        out.extend(monomials(n, d))
    return tuple(out)


@dataclass(frozen=True)
class Polynomial:
    """Sparse multivariate polynomial; terms are (exponent tuple, coefficient)."""

    n: int
    terms: Tuple[Tuple[Exponent, float], ...] = ()

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[Tuple[Sequence[int], float]], tol: float = 0.0) -> "Polynomial":
        acc: Dict[Exponent, float] = {}
        for exps, coeff in terms:
            alpha = tuple(int(e) for e in exps)
            if len(alpha) != n:
                raise ProblemError(f"Exponent tuple {alpha} does not have length {n}")
            if any(e < 0 for e in alpha):
                raise ProblemError(f"Exponent tuple {alpha} has negative entries")
            acc[alpha] = acc.get(alpha, 0.0) + float(coeff)
        kept = tuple(
            (alpha, c)
            for alpha, c in sorted(acc.items(), key=lambda t: (sum(t[0]), t[0]))
            if abs(c) > tol
        )
        return cls(n=n, terms=kept)

    @classmethod
    def constant(cls, n: int, value: float) -> "Polynomial":
        return cls.from_terms(n, [((0,) * n, value)])

    def coefficients(self) -> Dict[Exponent, float]:
        return dict(self.terms)

    def coefficient(self, alpha: Exponent) -> float:
        return self.coefficients().get(tuple(alpha), 0.0)

    @property
    def degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(alpha) for alpha, _ in self.terms)

    @property
    def degrees(self) -> Tuple[int, ...]:
        """Distinct total degrees of the monomials present."""
        return tuple(sorted({sum(alpha) for alpha, _ in self.terms}))

    @property
    def constant_term(self) -> float:
        return self.coefficient((0,) * self.n)

    def _check(self, other: "Polynomial") -> None:
        if other.n != self.n:
            raise ProblemError(f"Polynomial dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "Polynomial | float") -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.n, float(other))
        self._check(other)
        return Polynomial.from_terms(self.n, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.n, tuple((a, -c) for a, c in self.terms))

    def __sub__(self, other: "Polynomial | float") -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.n, float(other))
        return self + (-other)

    def __rsub__(self, other: float) -> "Polynomial":
        return Polynomial.constant(self.n, float(other)) - self

    def __mul__(self, other: "Polynomial | float") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return Polynomial.from_terms(self.n, ((a, c * float(other)) for a, c in self.terms))
        self._check(other)
        prod = []
        for a0, c0 in self.terms:
            for a1, c1 in other.terms:
                prod.append((tuple(x + y for x, y in zip(a0, a1)), c0 * c1))
        return Polynomial.from_terms(self.n, prod)

    __rmul__ = __mul__

    def __truediv__(self, value: float) -> "Polynomial":
        return self * (1.0 / float(value))

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ProblemError("Negative polynomial powers are not supported")
        acc = Polynomial.constant(self.n, 1.0)
        base = self
        while k:
            if k & 1:
                acc = acc * base
            base = base * base
            k >>= 1
        return acc

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for _, c in self.terms), default=0.0)

    def evaluate(self, points: np.ndarray) -> np.ndarray | float:
        """Evaluate at one point (shape (n,)) or many points (shape (P, n))."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.n:
            raise ProblemError(f"Points have dimension {pts.shape[1]}, polynomial expects {self.n}")
        if not self.terms:
            values = np.zeros(pts.shape[0])
        else:
            exps = np.array([a for a, _ in self.terms], dtype=float)
            coeffs = np.array([c for _, c in self.terms])
            values = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2) @ coeffs
        return float(values[0]) if single else values

    def __call__(self, points: np.ndarray) -> np.ndarray | float:
        return self.evaluate(points)

    def pretty(self, digits: int = 4) -> str:
        if not self.terms:
            return "0"
        parts = []
        for alpha, c in self.terms:
            mono = "*".join(
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}" for i, e in enumerate(alpha) if e
            )
            coeff = f"{c:.{digits}g}"
            parts.append(f"{coeff}*{mono}" if mono else coeff)
        return " + ".join(parts).replace("+ -", "- ")


def max_polynomial(polys: Sequence[Polynomial], points: np.ndarray) -> np.ndarray:
    """Pointwise max_i c_i(x); the described set is its unit sublevel set."""
    if not polys:
        raise ProblemError("Empty polynomial list")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.max(np.vstack([p.evaluate(pts) for p in polys]), axis=0)


def normalize_constraint(poly: Polynomial, rhs: float = 1.0) -> Polynomial:
    """Rewrite p(x) <= rhs as c(x) <= 1 with c(0) = 0.

    The constant term moves to the right-hand side, which must stay positive
    so the origin is an interior point.
    """
    if poly.degree < 1:
        raise ProblemError("Constraint polynomial has degree 0")
    const = poly.constant_term
    slack = float(rhs) - const
    if slack <= 0:
        raise ProblemError(
            f"Origin is not interior to constraint {poly.pretty()} <= {rhs} (rhs - constant = {slack:g})"
        )
    shifted = poly - const
    return Polynomial(poly.n, tuple((a, c / slack) for a, c in shifted.terms if sum(a) > 0))


@dataclass(frozen=True)
class LiftBasis:
    """Ordered degree set L and the coordinate map of R^N."""

    n: int
    degrees: Tuple[int, ...]
    coordinates: Tuple[Tuple[int, Exponent], ...] = field(init=False)
    index_map: Dict[Tuple[int, Exponent], int] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        degrees = tuple(int(d) for d in self.degrees)
        if self.n < 1:
            raise ProblemError(f"State dimension must be positive, got {self.n}")
        if not degrees or any(d < 1 for d in degrees) or list(degrees) != sorted(set(degrees)):
            raise ProblemError(f"Degree set must be strictly increasing positive integers, got {degrees}")
        coords = tuple((d, alpha) for d in degrees for alpha in monomials(self.n, d))
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "index_map", {c: k for k, c in enumerate(coords)})

    @property
    def N(self) -> int:
        return len(self.coordinates)

    def block(self, degree: int) -> slice:
        start = 0
        for d in self.degrees:
            size = math.comb(self.n + d - 1, d)
            if d == degree:
                return slice(start, start + size)
            start += size
        raise KeyError(degree)

    @property
    def exponent_matrix(self) -> np.ndarray:
        return np.array([alpha for _, alpha in self.coordinates], dtype=float)

    @property
    def scales(self) -> np.ndarray:
        """sqrt(alpha!) for every coordinate."""
        return np.sqrt(np.array([multinomial(alpha) for _, alpha in self.coordinates], dtype=float))

    def describe(self) -> List[str]:
        out = []
        for k, (d, alpha) in enumerate(self.coordinates):
            mono = "*".join(f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}" for i, e in enumerate(alpha) if e)
            scale = multinomial(alpha)
            prefix = f"sqrt({scale})*" if scale != 1 else ""
            out.append(f"y{k + 1} = {prefix}{mono}  (degree {d})")
        return out


def lift_vector(x: np.ndarray, basis: LiftBasis) -> np.ndarray:
    """The L-lift of a point (shape (n,)) or of each row of a (P, n) array."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != basis.n:
        raise ProblemError(f"Vector has dimension {pts.shape[1]}, lift basis expects {basis.n}")
    lifted = np.prod(pts[:, None, :] ** basis.exponent_matrix[None, :, :], axis=2) * basis.scales
    return lifted[0] if single else lifted


def permanent(M: np.ndarray) -> float:
    """Permanent via Ryser's inclusion-exclusion formula."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ProblemError(f"Permanent needs a square matrix, got shape {M.shape}")
    k = M.shape[0]
    if k == 0:
        return 1.0
    total = 0.0
    for size in range(1, k + 1):
        sign = (-1) ** size
        for cols in itertools.combinations(range(k), size):
            total += sign * np.prod(M[:, cols].sum(axis=1))
    return float((-1) ** k * total)


def _check_square(A: np.ndarray, n: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (n, n):
        raise ProblemError(f"Matrix has shape {A.shape}, expected ({n}, {n})")
    return A


def _lift_block(A: np.ndarray, degree: int) -> np.ndarray:
    """Exact expansion of sqrt(alpha!) (A x)^alpha over the rational values of A."""
    n = A.shape[0]
    xs = sp.symbols(f"x1:{n + 1}")
    images = [sp.Add(*(sp.Rational(float(A[i, j])) * xs[j] for j in range(n))) for i in range(n)]
    monos = monomials(n, degree)
    index = {alpha: k for k, alpha in enumerate(monos)}
    block = np.zeros((len(monos), len(monos)))
    for r, alpha in enumerate(monos):
        image = sp.Poly(sp.expand(sp.Mul(*(images[i] ** a for i, a in enumerate(alpha)))), *xs)
        for beta, coeff in image.as_dict().items():
            block[r, index[beta]] = float(coeff * sp.sqrt(multinomial(alpha)) / sp.sqrt(multinomial(beta)))
    return block


def lift_matrix(A: np.ndarray, basis: LiftBasis) -> np.ndarray:
    """Block-diagonal L-lift of A, built by expanding (Ax)^alpha."""
    A = _check_square(A, basis.n)
    out = np.zeros((basis.N, basis.N))
    for d in basis.degrees:
        sl = basis.block(d)
        out[sl, sl] = _lift_block(A, d)
    return out


def lift_matrix_permanent(A: np.ndarray, basis: LiftBasis) -> np.ndarray:
    """Same lift from the permanent formula per(A(alpha, beta)) / sqrt(mu(alpha) mu(beta))."""
    A = _check_square(A, basis.n)

    def mu(alpha: Exponent) -> int:
        return math.prod(math.factorial(a) for a in alpha)

    def repeat(alpha: Exponent) -> List[int]:
        return [i for i, a in enumerate(alpha) for _ in range(a)]

    out = np.zeros((basis.N, basis.N))
    for d in basis.degrees:
        sl = basis.block(d)
        monos = monomials(basis.n, d)
        for r, alpha in enumerate(monos):
            for c, beta in enumerate(monos):
                sub = A[np.ix_(repeat(alpha), repeat(beta))]
                out[sl.start + r, sl.start + c] = permanent(sub) / math.sqrt(mu(alpha) * mu(beta))
    return out


@dataclass(frozen=True)
class LiftedMatrixSet:
    """The matrix set A = {A_1..A_M} together with its L-lift."""

    original: Tuple[np.ndarray, ...]
    lifted: Tuple[np.ndarray, ...]

    @classmethod
    def build(cls, matrices: Sequence[np.ndarray], basis: LiftBasis) -> "LiftedMatrixSet":
        if not matrices:
            raise ProblemError("The matrix set is empty")
        original = tuple(_check_square(A, basis.n) for A in matrices)
        return cls(original=original, lifted=tuple(lift_matrix(A, basis) for A in original))


def decompose_constraints(polys: Sequence[Polynomial]) -> Tuple[LiftBasis, List[np.ndarray]]:
    """Extract L and vectors g_i with g_i^T x^[L] = c_i(x)."""
    if not polys:
        raise ProblemError("Constraint list is empty")
    n = polys[0].n
    degrees: set[int] = set()
    for k, p in enumerate(polys):
        if p.n != n:
            raise ProblemError(f"Constraint {k} has dimension {p.n}, expected {n}")
        if p.degree < 1:
            raise ProblemError(f"Constraint {k} has degree 0")
        if p.constant_term != 0.0:
            raise ProblemError(f"Constraint {k} has a constant term; normalize it to c(x) <= 1 first")
        degrees.update(p.degrees)
    basis = LiftBasis(n=n, degrees=tuple(sorted(degrees)))
    gs = []
    for p in polys:
        g = np.zeros(basis.N)
        for alpha, coeff in p.terms:
            g[basis.index_map[(sum(alpha), alpha)]] = coeff / math.sqrt(multinomial(alpha))
        gs.append(g)
    log.debug(f"Decomposed {len(polys)} constraints: L={basis.degrees}, N={basis.N}")
    return basis, gs


def lower_row(f: np.ndarray, basis: LiftBasis) -> Polynomial:
    """The polynomial f^T x^[L]."""
    f = np.asarray(f, dtype=float)
    if f.shape != (basis.N,):
        raise ProblemError(f"Row has length {f.shape}, lift basis has N={basis.N}")
    return Polynomial.from_terms(
        basis.n,
        ((alpha, f[k] * math.sqrt(multinomial(alpha))) for k, (_, alpha) in enumerate(basis.coordinates)),
        tol=settings.COEFF_PRUNE_TOL,
    )


def lower_polyhedron(P, basis: LiftBasis) -> List[Polynomial]:
    """Lower {y : F y <= 1} to the polynomials c_i(x) = f_i^T x^[L]."""
    if P.dim != basis.N:
        raise ProblemError(f"Polyhedron lives in R^{P.dim}, lift basis has N={basis.N}")
    if not P.has_unit_rhs():
        raise ProblemError("Lowering needs a unit right-hand side; normalize the polyhedron first")
    return [lower_row(f, basis) for f in P.A]
