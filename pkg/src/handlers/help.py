from __future__ import annotations
import argparse

DETAILED_HELP = (
    "Commands\n\n"
    "solve <problem.json> - Compute the maximal admissible invariant set.\n"
    "  --algorithm {1,2,3}   1: variety test with SOS, 2: state box, 3: box around the origin\n"
    "  --max-iter N          iteration cap (default 100)\n"
    "  --sos-degree D        cap on the SOS certificate degree; multipliers start as constants (default: constraint degree)\n"
    "  --delta D             lower-bound shift of the algorithm-3 box (default 0.1)\n"
    "  --jsr-depth T         longest product tried by the stability gate (default 8)\n"
    "  --skip-gate           continue when stability cannot be certified\n"
    "  --no-sos              keep the LP-reduced description only\n"
    "  Example: solve fixtures/example1.json --algorithm 3\n\n"
    "check <problem.json> - JSR bounds, constraint normalization and the invariance LP verdict.\n\n"
    "grid <result.json> - Sample the computed set on a grid (CSV; SVG for n = 2).\n"
    "  --grid-res R, --bounds XMIN.. XMAX..\n\n"
    "verify <result.json> [--problem <problem.json>] - Exhaustive switching simulation on a grid.\n"
    "  --grid-res R, --horizon T (default iterations + 2), --margin M, --convexity SAMPLES\n\n"
    "lift <problem.json> - Print the lift basis, lifted matrices and lifted constraints.\n\n"
    "Exit codes: 0 ok, 1 internal error, 2 bad input, 3 stability gate, 4 no convergence,\n"
    "5 verification violations, 6 solver failure, 7 problem/result mismatch, 8 state box rejected.\n"
)


def help_cmd(args: argparse.Namespace) -> int:
    print(DETAILED_HELP)
    return 0
