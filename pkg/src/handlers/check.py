from __future__ import annotations
import argparse
import logging

from src import storage
from src.errors import AssumptionError
from src.services import engine
from src.services.certificates import certify_stability, check_invariance, InvarianceCertificate, jsr_bounds

log = logging.getLogger(__name__)


def check(args: argparse.Namespace) -> int:
    problem = storage.load_problem(args.problem)
    problem.options.tolerances.apply()
    sys = storage.to_system(problem)
    X = storage.to_constraint_set(problem)
    print("Constraints normalized to c(x) <= 1 with c(0) = 0 (origin interior):")
    for p in X.polynomials:
        print(f"  {p.pretty()} <= 1")

    depth = args.jsr_depth or problem.options.jsr_depth
    gate_ok = True
    try:
        bounds = certify_stability(sys.matrices, depth, override=False)
    except AssumptionError as e:
        if not args.skip_gate:
            raise
        bounds, gate_ok = e.bounds, False
        log.warning(f"Stability gate failed, continuing: {e}")
    print(f"JSR of the system: {bounds.lower:.8g} <= rho <= {bounds.upper:.8g} (depth {bounds.depth})")

    problem_lifted = engine.build_lifted_problem(sys, X)
    lifted = jsr_bounds(problem_lifted.sys_lifted, bounds.depth)
    predicted = max(bounds.lower ** d for d in problem_lifted.basis.degrees)
    print(f"JSR of the lifted system: {lifted.lower:.8g} <= rho <= {lifted.upper:.8g}")
    print(f"  max_l lower^l = {predicted:.8g} (difference {abs(predicted - lifted.lower):.2e})")

    if gate_ok:
        cert = check_invariance(problem_lifted.X_lifted.A, problem_lifted.sys_lifted)
    else:
        cert = InvarianceCertificate("not-applicable")
    eps = f", eps = {cert.epsilon:.8g}" if cert.epsilon is not None else ""
    print(f"Invariance of the lifted constraint set: {cert.verdict}{eps}")
    return 0
