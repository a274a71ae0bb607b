from __future__ import annotations
import argparse
import json
import logging
from pathlib import Path

from src import storage
from src.services.simulation import convexity_check, verify_by_simulation

log = logging.getLogger(__name__)

USAGE_HINT = "Loosened or missing polynomials show up as inside violations; extra ones as outside violations."


def verify(args: argparse.Namespace) -> int:
    result = storage.load_result(args.result)
    if args.problem:
        problem = storage.load_problem(args.problem)
        result.check_problem(problem)
    else:
        problem = result.problem
    if problem.state_box is None:
        x_min, x_max = [-1.0] * problem.n, [1.0] * problem.n
    else:
        x_min, x_max = problem.state_box.x_min, problem.state_box.x_max

    X = storage.to_constraint_set(problem)
    description = [p for p, _, _ in storage.described_set(result)]
    horizon = args.horizon if args.horizon is not None else result.iterations + 2
    report = verify_by_simulation(
        problem.matrices, X.polynomials, description, x_min, x_max, args.grid_res, horizon, args.margin
    )
    print(f"Grid {args.grid_res}^{problem.n}, horizon {horizon}: "
          f"{report.inside} inside, {report.outside} outside, {report.boundary} on the boundary band")
    if report.outside_skipped:
        print("Outside check skipped (horizon 0)")
    if report.components > 1:
        first, second = report.component_witnesses[:2]
        print(f"Set has {report.components} components on the grid, e.g. {first} and {second}")
    if args.convexity:
        conv = convexity_check(description, x_min, x_max, samples=args.convexity)
        print(f"Midpoint convexity over {conv.pairs} pairs: {'holds' if conv.holds else 'FAILS'}")
    if args.output:
        Path(args.output).write_text(json.dumps(report.to_json(), indent=2), encoding="utf-8")
    if report.ok:
        print("No violations")
        return 0
    for pt in report.inside_violations[:10]:
        print(f"  inside point leaves X: {pt}")
    for pt in report.outside_violations[:10]:
        print(f"  outside point never leaves X: {pt}")
    print(f"{len(report.inside_violations)} inside and {len(report.outside_violations)} outside violations. {USAGE_HINT}")
    return 5
