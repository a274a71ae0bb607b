from __future__ import annotations
import math

import numpy as np
import pytest

from src.errors import ProblemError
from src.services.polylift import (
    LiftBasis,
    LiftedMatrixSet,
    Polynomial,
    decompose_constraints,
    lift_matrix,
    lift_matrix_permanent,
    lift_vector,
    lower_row,
    monomials,
    multinomial,
    normalize_constraint,
    permanent,
)
from src.services.polyhedra import HPolyhedron
from src.services.polylift import lower_polyhedron

A1 = np.array([[1.0425, 0.3416], [-0.5893, 0.5839]])
A2 = np.array([[0.0, 0.65], [0.65, 0.0]])


@pytest.mark.parametrize("alpha,expected", [((2, 0), 1), ((1, 1), 2), ((1, 1, 1), 6), ((2, 1), 3), ((0, 0), 1)])
def test_multinomial(alpha, expected):
    assert multinomial(alpha) == expected


def test_monomial_order():
    assert monomials(2, 1) == ((1, 0), (0, 1))
    assert monomials(2, 2) == ((0, 2), (1, 1), (2, 0))
    assert len(monomials(3, 3)) == math.comb(5, 3)


@pytest.mark.parametrize("n,degrees", [(2, (2,)), (2, (1, 2)), (3, (1, 3)), (4, (2,))])
def test_basis_size(n, degrees):
    basis = LiftBasis(n, degrees)
    assert basis.N == sum(math.comb(n + d - 1, d) for d in degrees)


def test_basis_rejects_bad_degrees():
    with pytest.raises(ProblemError):
        LiftBasis(2, (0, 1))
    with pytest.raises(ProblemError):
        LiftBasis(2, (2, 1))


def test_lift_vector_examples():
    np.testing.assert_allclose(lift_vector(np.array([1.0, 2.0]), LiftBasis(2, (2,))), [4.0, 2 * math.sqrt(2), 1.0])
    np.testing.assert_allclose(lift_vector(np.array([1.0, 2.0]), LiftBasis(2, (1, 2))), [1.0, 2.0, 4.0, 2 * math.sqrt(2), 1.0])


def test_lift_preserves_norm_power():
    rng = np.random.default_rng(1)
    for d in (1, 2, 3, 4):
        basis = LiftBasis(3, (d,))
        x = rng.normal(size=3)
        assert np.linalg.norm(lift_vector(x, basis)) == pytest.approx(np.linalg.norm(x) ** d, rel=1e-12)


def test_running_example_lifted_matrices():
    basis = LiftBasis(2, (2,))
    L1, L2 = lift_matrix(A1, basis), lift_matrix(A2, basis)
    np.testing.assert_allclose(np.round(L1[0], 2), [0.34, -0.49, 0.35])
    (a, b), (c, d) = A1
    r2 = math.sqrt(2)
    expected = [
        [d * d, r2 * c * d, c * c],
        [r2 * b * d, a * d + b * c, r2 * a * c],
        [b * b, r2 * a * b, a * a],
    ]
    np.testing.assert_allclose(L1, expected, atol=1e-12)
    np.testing.assert_allclose(np.fliplr(L2).diagonal(), [0.4225] * 3, atol=1e-12)
    assert L2[0, 0] == 0.0 and L2[1, 0] == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_lift_spectral_radius_is_power(d):
    for A in (A1, A2):
        rho = max(abs(np.linalg.eigvals(A)))
        lifted = lift_matrix(A, LiftBasis(2, (d,)))
        assert max(abs(np.linalg.eigvals(lifted))) == pytest.approx(rho ** d, rel=1e-9)

@pytest.mark.parametrize("degrees", [(1,), (2,), (1, 2), (3,), (2, 4)])
def test_lift_homomorphism(degrees):
    rng = np.random.default_rng(7)
    basis = LiftBasis(2, degrees)
    L = lift_matrix(A1, basis)
    xs = rng.normal(size=(200, 2))
    lhs = lift_vector(xs @ A1.T, basis)
    rhs = lift_vector(xs, basis) @ L.T
    assert np.max(np.linalg.norm(lhs - rhs, axis=1)) <= 1e-10


def test_lift_is_multiplicative():
    basis = LiftBasis(3, (2, 3))
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    np.testing.assert_allclose(lift_matrix(A @ B, basis), lift_matrix(A, basis) @ lift_matrix(B, basis), atol=1e-10)


def test_identity_lifts_to_identity():
    basis = LiftBasis(3, (1, 2, 3))
    np.testing.assert_allclose(lift_matrix(np.eye(3), basis), np.eye(basis.N))


def test_permanent_formula_matches_expansion():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(3, 3))
    basis = LiftBasis(3, (1, 2, 3))
    np.testing.assert_allclose(lift_matrix_permanent(A, basis), lift_matrix(A, basis), atol=1e-10)


def test_permanent():
    assert permanent(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(10.0)
    assert permanent(np.ones((3, 3))) == pytest.approx(6.0)
    with pytest.raises(ProblemError):
        permanent(np.ones((2, 3)))


def test_lifted_matrix_set_rejects_wrong_shape():
    with pytest.raises(ProblemError):
        LiftedMatrixSet.build([np.eye(3)], LiftBasis(2, (2,)))


def test_polynomial_arithmetic():
    x = Polynomial.from_terms(2, [((1, 0), 1.0)])
    y = Polynomial.from_terms(2, [((0, 1), 1.0)])
    p = (x + y) ** 2
    assert p.coefficient((1, 1)) == pytest.approx(2.0)
    assert (p - x * x - y * y - 2 * x * y).terms == ()
    assert p.evaluate(np.array([1.0, 2.0])) == pytest.approx(9.0)
    assert (1 - x).constant_term == 1.0
    assert p.degree == 2 and Polynomial(2).degree == -1


def test_decompose_running_example(running_constraints):
    basis, gs = decompose_constraints(running_constraints.polynomials)
    assert basis.degrees == (2,)
    np.testing.assert_allclose(np.vstack(gs), [[1, 0, 1], [1, 6, -4], [-3, 10, 2]], atol=1e-12)


def test_decompose_mixed_degrees():
    c = Polynomial.from_terms(2, [((1, 0), 2.0), ((0, 2), 1.0)])
    basis, gs = decompose_constraints([c])
    assert basis.degrees == (1, 2) and basis.N == 5
    np.testing.assert_allclose(gs[0], [2.0, 0.0, 1.0, 0.0, 0.0])


def test_decompose_rejects_constant_term():
    c = Polynomial.from_terms(2, [((0, 0), 0.5), ((2, 0), 1.0)])
    with pytest.raises(ProblemError):
        decompose_constraints([c])
    with pytest.raises(ProblemError):
        decompose_constraints([])


def test_lowering_round_trip(running_constraints):
    polys = running_constraints.polynomials
    basis, gs = decompose_constraints(polys)
    for p, g in zip(polys, gs):
        back = lower_row(g, basis)
        assert set(back.coefficients()) == set(p.coefficients())
        for alpha, c in p.terms:
            assert back.coefficient(alpha) == pytest.approx(c, abs=1e-12)
    lowered = lower_polyhedron(HPolyhedron(np.vstack(gs), np.ones(3)), basis)
    pts = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
    for p, q in zip(polys, lowered):
        np.testing.assert_allclose(p(pts), q(pts), atol=1e-12)


def test_lower_polyhedron_needs_unit_rhs():
    basis = LiftBasis(2, (2,))
    with pytest.raises(ProblemError):
        lower_polyhedron(HPolyhedron(np.eye(3), [2.0, 1.0, 1.0]), basis)


def test_normalize_constraint():
    p = Polynomial.from_terms(2, [((0, 0), 1.0), ((2, 0), 2.0)])
    c = normalize_constraint(p, rhs=3.0)
    assert c.constant_term == 0.0
    assert c.coefficient((2, 0)) == pytest.approx(1.0)
    with pytest.raises(ProblemError):
        normalize_constraint(p, rhs=1.0)
    with pytest.raises(ProblemError):
        normalize_constraint(Polynomial.constant(2, 0.5))
