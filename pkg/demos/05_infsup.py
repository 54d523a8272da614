"""Discrete inf-sup constants of the velocity-pressure pair.

The constant is the square root of the smallest eigenvalue of the pressure
Schur complement against the pressure norm, restricted to mean-free pressures
that vanish at the corners. It decays slowly with h and stays well away from
zero for both length scales.
Run with ``python3 demos/05_infsup.py``.
"""

from sgefem.assembly import assemble_parts, estimate_infsup
from sgefem.mesh import build_structured_square

for iota in (1.0, 1e-6):
    print(f"iota = {iota:g}")
    for n in (4, 8, 16):
        mesh = build_structured_square(n)
        r = estimate_infsup(mesh, iota, parts=assemble_parts(mesh, gram=True))
        print(f"  n={n:3d}  beta_h={r.beta:.4f}  beta_h log^(3/2)(1/h)={r.scaled:.4f}  ({r.iterations} iterations)")
