"""Convergence of the mixed method for smooth solutions.

Shows first order for a large length scale, second order for a tiny one,
no deterioration as the material becomes incompressible, and agreement with
the classical elasticity limit when the length scale goes to zero.
Run with ``python3 demos/02_locking_and_layers.py`` (about a minute).
"""

import numpy as np

from sgefem.assembly import assemble_parts, solve_case
from sgefem.mesh import build_structured_square
from sgefem.solutions import make_case

LEVELS = (8, 16, 32)
meshes = {n: build_structured_square(n) for n in LEVELS}
parts = {n: assemble_parts(meshes[n]) for n in LEVELS}


def ladder(case_id, nu, iota):
    errs = [solve_case(meshes[n], make_case(case_id, nu, iota), parts=parts[n]).errors.relative for n in LEVELS]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    return errs, rates


def show(title, case_id, combos):
    print(title)
    print("  " + " " * 22 + "".join(f"h=1/{n:<8d}" for n in LEVELS) + "rates")
    for nu, iota in combos:
        errs, rates = ladder(case_id, nu, iota)
        print(
            f"  nu={nu:<6} iota={iota:<6g} " + "".join(f"{e:<10.3e}" for e in errs)
            + " ".join(f"{r:.2f}" for r in rates)
        )
    print()


show("Divergence-free smooth solution: the nu = 0.4999 rows match the nu = 0.3 rows.",
     1, [(0.3, 1.0), (0.4999, 1.0), (0.3, 1e-6), (0.4999, 1e-6)])
show("Smooth solution with nonzero divergence: the same orders survive near incompressibility.",
     2, [(0.3, 1.0), (0.4999, 1e-6)])
show("Errors against the classical elasticity solution: both small length scales give the same column.",
     4, [(0.3, 1e-4), (0.3, 1e-6)])
