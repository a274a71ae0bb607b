from __future__ import annotations
import math

import numpy as np
import pytest

from conftest import poly
from src.errors import AssumptionError, EnumerationBudgetError, ProblemError, SDPSolverError
from src.services import certificates
from src.services.certificates import (
    certify_stability,
    check_invariance,
    jsr_bounds,
    minimal_semialgebraic,
    sos_bound,
    sos_redundancy,
)
from src.services.polylift import LiftBasis, LiftedMatrixSet, max_polynomial

RUNNING = [np.array([[1.0425, 0.3416], [-0.5893, 0.5839]]), np.array([[0.0, 0.65], [0.65, 0.0]])]
EXAMPLE1 = np.array([[1.0216, 0.3234], [-0.6597, 0.5226]])
CIRCLE = poly([((2, 0), 1.0), ((0, 2), 1.0)])


def test_identity_is_invariant():
    G = np.array([[1.0, 0.0, 1.0], [1.0, 6.0, -4.0]])
    cert = check_invariance(G, [np.eye(3)])
    assert cert.verdict == "invariant"
    assert cert.epsilon == pytest.approx(1.0, abs=1e-8)
    for H in cert.H:
        assert np.all(H >= 0)
        np.testing.assert_allclose(H @ G, G, atol=1e-8)


def test_running_example_lifted_constraints_are_not_certified():
    G = np.array([[1.0, 0.0, 1.0], [1.0, 6.0, -4.0], [-3.0, 10.0, 2.0]])
    sys = LiftedMatrixSet.build(RUNNING, LiftBasis(2, (2,)))
    cert = check_invariance(G, sys)
    assert cert.verdict == "unknown"
    assert cert.epsilon is None


def test_contraction_has_epsilon_below_one():
    sys = LiftedMatrixSet.build([0.5 * np.eye(2)], LiftBasis(2, (2,)))
    cert = check_invariance(np.array([[1.0, 0.0, 1.0]]), sys)
    assert cert.verdict == "invariant"
    assert cert.epsilon == pytest.approx(0.25, abs=1e-8)


def test_epsilon_reported_above_one():
    # the circle row maps to 4 times itself
    sys = LiftedMatrixSet.build([2.0 * np.eye(2)], LiftBasis(2, (2,)))
    cert = check_invariance(np.array([[1.0, 0.0, 1.0]]), sys)
    assert cert.verdict == "unknown"
    assert cert.epsilon == pytest.approx(4.0, abs=1e-7)


def test_single_matrix_bounds_bracket_spectral_radius():
    rho = max(abs(np.linalg.eigvals(EXAMPLE1)))
    b = jsr_bounds([EXAMPLE1], 6)
    assert b.lower == pytest.approx(rho, rel=1e-10)
    assert b.lower <= b.upper


def test_running_example_jsr_bracket():
    b = jsr_bounds(RUNNING, 8)
    # the product of both modes has spectral radius 0.81, so the lower bound sits at 0.9
    assert abs(b.lower - 0.9) <= 1e-4
    assert b.upper - b.lower <= 0.07
    assert b.upper < 1.0


def test_lifted_lower_bound_is_power_of_original():
    basis = LiftBasis(2, (2,))
    lifted = LiftedMatrixSet.build(RUNNING, basis)
    b, bl = jsr_bounds(RUNNING, 8), jsr_bounds(lifted, 8)
    assert bl.lower == pytest.approx(b.lower ** 2, abs=1e-8)
    assert abs(bl.lower - 0.81) <= 2e-4 and 0.81 <= bl.upper
    mixed = jsr_bounds(LiftedMatrixSet.build(RUNNING, LiftBasis(2, (1, 2))), 5)
    assert mixed.lower == pytest.approx(max(jsr_bounds(RUNNING, 5).lower ** d for d in (1, 2)), abs=1e-8)


def test_budget(monkeypatch):
    monkeypatch.setattr(certificates.settings, "JSR_PRODUCT_BUDGET", 100)
    with pytest.raises(EnumerationBudgetError):
        jsr_bounds(RUNNING, 8)


def test_stability_gate():
    assert certify_stability(RUNNING).upper < 1
    with pytest.raises(AssumptionError) as exc:
        certify_stability([np.eye(2)])
    assert exc.value.bounds.lower == pytest.approx(1.0)
    assert certify_stability([np.eye(2)], override=True).upper >= 1


def test_scaled_copy_is_redundant():
    half = poly([((2, 0), 0.5), ((0, 2), 0.5)])
    cert = sos_redundancy([CIRCLE, half], 1)
    assert cert.verdict == "redundant"
    assert cert.epsilon_star == pytest.approx(0.5, abs=1e-5)
    assert cert.residual <= 1e-6
    for G in cert.gram_matrices:
        if G.size:
            assert np.min(np.linalg.eigvalsh(G)) >= -1e-7
    assert cert.multiplier_degree == 0


def test_independent_variables_are_inconclusive():
    x1sq, x2sq = poly([((2, 0), 1.0)]), poly([((0, 2), 1.0)])
    for degree in (2, 4):
        assert sos_redundancy([x1sq, x2sq], 0, degree).verdict == "inconclusive"


def test_multiplier_degree_escalates():
    # constant multipliers cannot cancel the quartic term, quadratic ones can
    quartic = poly([((4, 0), 0.5), ((0, 4), 0.5)])
    cert = sos_redundancy([CIRCLE, quartic], 1)
    assert cert.verdict == "redundant"
    assert cert.multiplier_degree == 2
    assert cert.epsilon_star == pytest.approx(0.5, abs=1e-5)


def test_multiplier_degree_must_be_even():
    with pytest.raises(ProblemError):
        sos_bound([CIRCLE], CIRCLE, multiplier_degree=1)


def test_fallback_solver_is_used(monkeypatch):
    half = poly([((2, 0), 0.5), ((0, 2), 0.5)])
    monkeypatch.setattr(certificates.settings, "SDP_SOLVER", "NO_SUCH_SOLVER")
    monkeypatch.setattr(certificates.settings, "SDP_FALLBACK_SOLVER", "CLARABEL")
    assert sos_bound([CIRCLE], half).epsilon == pytest.approx(0.5, abs=1e-5)
    monkeypatch.setattr(certificates.settings, "SDP_FALLBACK_SOLVER", "NO_SUCH_SOLVER")
    with pytest.raises(SDPSolverError):
        sos_bound([CIRCLE], half)


def test_solver_failure_is_inconclusive(monkeypatch):
    def broken(*args, **kwargs):
        raise SDPSolverError("numerical trouble")

    monkeypatch.setattr(certificates, "sos_bound", broken)
    cert = sos_redundancy([CIRCLE, poly([((2, 0), 0.5), ((0, 2), 0.5)])], 1)
    assert cert.verdict == "inconclusive" and cert.epsilon_star is None
    assert minimal_semialgebraic([CIRCLE, poly([((2, 0), 2.0), ((0, 2), 0.5)])]).kept == [0, 1]



def test_tangent_bound_is_one():
    bound = sos_bound([CIRCLE], CIRCLE)
    assert bound.verified
    assert bound.epsilon == pytest.approx(1.0, abs=1e-6)


def test_minimal_semialgebraic():
    assert minimal_semialgebraic([CIRCLE]).kept == [0]
    assert minimal_semialgebraic([CIRCLE, CIRCLE]).kept == [1]
    half = poly([((2, 0), 0.5), ((0, 2), 0.5)])
    outcome = minimal_semialgebraic([half, CIRCLE])
    assert outcome.kept == [1]
    assert outcome.certificates[0].verdict == "redundant"


def test_certified_rows_hold_on_a_grid():
    # removing a certified row must not enlarge the set
    polys = [
        CIRCLE,
        poly([((0, 2), 1.0), ((1, 1), 6 * math.sqrt(2)), ((2, 0), -4.0)]),
        poly([((2, 0), 0.3), ((0, 2), 0.3), ((1, 1), 0.1)]),
    ]
    outcome = minimal_semialgebraic(polys)
    assert 2 not in outcome.kept
    axis = np.linspace(-1.2, 1.2, 100)
    pts = np.stack(np.meshgrid(axis, axis), axis=-1).reshape(-1, 2)
    others = [polys[i] for i in outcome.kept]
    feasible = max_polynomial(others, pts) <= 1.0
    assert np.all(polys[2](pts[feasible]) <= 1.0 + 1e-6)
