from __future__ import annotations
import argparse

import numpy as np

from src import storage
from src.services import engine


def lift(args: argparse.Namespace) -> int:
    problem = storage.load_problem(args.problem)
    lifted = engine.build_lifted_problem(storage.to_system(problem), storage.to_constraint_set(problem))
    basis = lifted.basis
    print(f"L = {list(basis.degrees)}, N = {basis.N}")
    for line in basis.describe():
        print(f"  {line}")
    with np.printoptions(precision=4, suppress=True, linewidth=120):
        for k, A in enumerate(lifted.sys_lifted.lifted):
            print(f"Lifted matrix {k + 1}:\n{A}")
        print(f"Lifted constraint rows (g_i^T y <= 1):\n{lifted.X_lifted.A}")
    return 0
