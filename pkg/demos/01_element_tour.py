"""A tour of the ten-DoF triangle and the global space built from it.

Run with ``python3 demos/01_element_tour.py``.
"""

import numpy as np

from sgefem.element import LocalBasis, ReferenceGeometry, dof_matrix, interpolate_local, tabulate
from sgefem.mesh import build_structured_square
from sgefem.quadrature import triangle_rule
from sgefem.space import build_layout

rng = np.random.default_rng(7)
tri = np.array([[0.1, 0.0], [1.3, 0.2], [0.4, 0.9]])
geom = ReferenceGeometry(tri)
basis = LocalBasis(geom)

print("Each shape function takes the value 1 in its own DoF and 0 in the others.")
D = dof_matrix(basis)[0]
print(f"  max |D - I| on this triangle: {np.abs(D - np.eye(10)).max():.1e}")

print("\nThe cell function is normalised so its mean over the triangle is one.")
rule = triangle_rule(10)
cell = basis.values(tabulate(rule.points))[0, :, 9]
print(f"  integral / area = {2 * (cell @ rule.weights):.15f}")

print("\nQuadratics are reproduced exactly by the local interpolant.")
coef = rng.normal(size=6)


def f(x):
    X, Y = x[..., 0], x[..., 1]
    return coef[0] + coef[1] * X + coef[2] * Y + coef[3] * X**2 + coef[4] * X * Y + coef[5] * Y**2


def grad_f(x):
    X, Y = x[..., 0], x[..., 1]
    return np.stack([coef[1] + 2 * coef[3] * X + coef[4] * Y, coef[2] + coef[4] * X + 2 * coef[5] * Y], axis=-1)


c = interpolate_local(geom, f, grad_f)
bary = rng.dirichlet(np.ones(3), size=200)
err = np.abs(basis.evaluate(c, bary) - f(geom.to_physical(bary))).max()
print(f"  max pointwise error at 200 random points: {err:.1e}")

print("\nOn a mesh, scalar DoFs are vertices, edge midpoints, edge normal moments and cells.")
for n in (1, 4, 16):
    mesh = build_structured_square(n)
    L = build_layout(mesh)
    print(
        f"  n={n:2d}: V={mesh.n_vertices:4d} E={mesh.n_edges:4d} T={mesh.n_triangles:4d} "
        f"-> {L.n_scalar:5d} scalar, {L.n_velocity:5d} velocity, {L.n_pressure:4d} pressure DoFs"
    )
