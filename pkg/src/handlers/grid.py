from __future__ import annotations
import argparse
import logging
from pathlib import Path

from src import storage
from src.errors import ProblemError
from src.services import figures

log = logging.getLogger(__name__)


def grid(args: argparse.Namespace) -> int:
    result = storage.load_result(args.result)
    n = result.problem.n
    if n not in (2, 3):
        raise ProblemError(f"Grid export supports n = 2 or 3, result has n = {n}")
    if args.bounds:
        if len(args.bounds) != 2 * n:
            raise ProblemError(f"--bounds needs {2 * n} numbers: x_min then x_max")
        x_min, x_max = args.bounds[:n], args.bounds[n:]
    elif result.problem.state_box is not None:
        x_min, x_max = result.problem.state_box.x_min, result.problem.state_box.x_max
    else:
        x_min, x_max = [-1.0] * n, [1.0] * n

    described = storage.described_set(result, reduced=False)
    kept = [p for p, _, keep in described if keep]
    sample = figures.sample_grid(kept, x_min, x_max, args.grid_res)
    out = Path(args.output) if args.output else Path(args.result).with_suffix(".csv")
    figures.write_csv(sample, out)
    print(f"{sample.rows} grid points, {int(sample.members.sum())} members -> {out}")
    if n == 2:
        curves = [(p, figures.curve_style(origin, keep)) for p, origin, keep in described]
        svg = out.with_suffix(".svg")
        figures.write_svg(curves, sample, x_min, x_max, svg, max(args.grid_res, 2))
        print(f"Figure -> {svg}")
    return 0
