from __future__ import annotations
import argparse
import logging
from pathlib import Path

from src import storage
from src.services import engine

log = logging.getLogger(__name__)


def default_output(problem_path: str, suffix: str) -> Path:
    p = Path(problem_path)
    return p.with_name(f"{p.stem}{suffix}")


def solve(args: argparse.Namespace) -> int:
    problem = storage.load_problem(args.problem)
    problem.options.tolerances.apply()
    sys = storage.to_system(problem)
    X = storage.to_constraint_set(problem)
    options = storage.run_options(
        problem,
        algorithm=args.algorithm,
        max_iter=args.max_iter,
        sos_degree=args.sos_degree,
        delta=args.delta,
        jsr_depth=args.jsr_depth,
        skip_gate=args.skip_gate or None,
        sos_reduce=False if args.no_sos else None,
    )
    box = problem.state_box
    log.info(f"Solving {args.problem} with algorithm {options.algorithm}")
    result = engine.solve(sys, X, box.x_min if box else None, box.x_max if box else None, options)

    out = Path(args.output) if args.output else default_output(args.problem, ".result.json")
    storage.save(storage.result_to_file(result, problem, include_matrices=args.verbose), out)

    kept = result.reduced_polynomials
    print(f"Algorithm {result.algorithm} converged after {result.iterations} iterations")
    print(f"Lifted space: L={list(result.basis.degrees)}, N={result.basis.N}")
    print(f"Description: {len(result.polynomials)} polynomials"
          + (f", {len(kept)} after SOS reduction" if kept is not None else ""))
    for p, origin in zip(result.polynomials, result.origins):
        print(f"  [{origin}] {p.pretty()} <= 1")
    print(f"Result written to {out}")
    return 0
