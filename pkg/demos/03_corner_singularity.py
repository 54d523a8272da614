"""A displacement with a sqrt(rho) corner singularity at the origin.

The exact field is not smooth, so the orders drop to one half and three halves.
The pressure is nonzero at three of the four corners, where the discrete
pressure is pinned. Pinning to the exact values keeps the optimal orders;
pinning to zero adds a pressure error that lowers both orders.
Run with ``python3 demos/03_corner_singularity.py`` (about a minute).
"""

import numpy as np

from sgefem.assembly import assemble_parts, solve_case
from sgefem.mesh import build_structured_square
from sgefem.solutions import make_case

LEVELS = (8, 16, 32)

for pin in ("exact", "zero"):
    print(f"corner pressures pinned to {pin!r} values")
    for iota in (1.0, 1e-6):
        case = make_case(3, 0.3, iota)
        errs = []
        for n in LEVELS:
            mesh = build_structured_square(n)
            errs.append(solve_case(mesh, case, parts=assemble_parts(mesh), corner_pressure=pin).errors.relative)
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        print(f"  iota={iota:<6g} errors " + " ".join(f"{e:.3e}" for e in errs)
              + "  rates " + " ".join(f"{r:.2f}" for r in rates))
    print()
