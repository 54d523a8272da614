"""Global DoF numbering for the velocity space V_h and the pressure space P_h.

Scalar velocity DoFs are numbered vertices first, then edge midpoints, edge
normal moments and cell means, ``N_s = V + 2E + T``.  The normal moment of an
edge is measured with the edge's canonical normal; an element whose outward
normal disagrees sees the DoF with a minus sign.  Sharing the moment this way
is what makes the average of the normal-derivative jump vanish on every
interior edge.

Vector DoFs interleave the two components: global index ``2 * s + c``.
Pressure DoFs are the mesh vertices.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import element
from .element import LocalBasis, ReferenceGeometry


@dataclass(frozen=True, eq=False)
class DofLayout:
    n_scalar: int
    n_pressure: int
    scalar_map: np.ndarray  # (T, 10) global scalar DoF of each local function
    scalar_sign: np.ndarray  # (T, 10) +-1
    fixed_velocity: np.ndarray  # vector DoF indices, sorted
    fixed_pressure: np.ndarray  # vertex indices (domain corners)
    offsets: dict  # first scalar index of each DoF kind

    @property
    def n_velocity(self):
        return 2 * self.n_scalar

    @property
    def free_velocity(self):
        mask = np.ones(self.n_velocity, dtype=bool)
        mask[self.fixed_velocity] = False
        return np.flatnonzero(mask)

    @property
    def free_pressure(self):
        mask = np.ones(self.n_pressure, dtype=bool)
        mask[self.fixed_pressure] = False
        return np.flatnonzero(mask)

    def vector_map(self):
        """(T, 20) global vector DoFs, local index ``2 * s + c``."""
        m = self.scalar_map
        return np.stack([2 * m, 2 * m + 1], axis=2).reshape(len(m), 20)

    def vector_sign(self):
        return np.repeat(self.scalar_sign, 2, axis=1)

    def local_coefficients(self, u):
        """Element coefficients ``(T, 10, 2)`` of a global vector coefficient array."""
        u = np.asarray(u).reshape(-1, 2)
        return u[self.scalar_map] * self.scalar_sign[..., None]

    def scalar_kind(self, kind):
        start = self.offsets[kind]
        stop = {"vertex": "midpoint", "midpoint": "moment", "moment": "cell", "cell": None}[kind]
        return np.arange(start, self.offsets[stop] if stop else self.n_scalar)


def build_layout(mesh):
    V, E, T = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    offsets = {"vertex": 0, "midpoint": V, "moment": V + E, "cell": V + 2 * E}
    smap = np.empty((T, 10), dtype=np.int64)
    smap[:, 0:3] = mesh.triangles
    smap[:, 3:6] = V + mesh.tri_edges
    smap[:, 6:9] = V + E + mesh.tri_edges
    smap[:, 9] = V + 2 * E + np.arange(T)
    sign = np.ones((T, 10), dtype=np.int64)
    sign[:, 6:9] = mesh.tri_edge_sign

    bnd_scalar = np.concatenate(
        [np.flatnonzero(mesh.boundary_vertex), V + np.flatnonzero(mesh.boundary_edge)]
    )
    fixed_velocity = np.sort(np.concatenate([2 * bnd_scalar, 2 * bnd_scalar + 1]))
    layout = DofLayout(
        n_scalar=V + 2 * E + T,
        n_pressure=V,
        scalar_map=smap,
        scalar_sign=sign,
        fixed_velocity=fixed_velocity,
        fixed_pressure=np.sort(mesh.corners),
        offsets=offsets,
    )
    for arr in (smap, sign, fixed_velocity):
        arr.setflags(write=False)
    return layout


def mesh_geometry(mesh):
    return ReferenceGeometry(mesh.triangle_vertices())


class InconsistentFieldError(ValueError):
    pass


def interpolate_global(layout, mesh, field, tol=1e-9, check=True):
    """Componentwise local interpolation of a smooth vector field.

    ``field`` provides ``value(x) -> (..., 2)`` and ``grad(x) -> (..., 2, 2)``
    with ``grad[..., i, j] = d u_i / d x_j``.  Shared DoFs computed from both
    sides must agree; a mismatch beyond ``tol`` means the field is not
    continuous enough to interpolate.
    """
    geom = mesh_geometry(mesh)
    local = np.empty((mesh.n_triangles, 10, 2))
    for c in range(2):
        local[:, :, c] = element.dof_functionals(
            geom,
            lambda x, c=c: field.value(x)[..., c],
            lambda x, c=c: field.grad(x)[..., c, :],
        )
    signed = local * layout.scalar_sign[..., None]
    out = np.zeros((layout.n_scalar, 2))
    out[layout.scalar_map.ravel()] = signed.reshape(-1, 2)
    if check:
        mismatch = np.abs(out[layout.scalar_map] - signed).max(initial=0.0)
        scale = max(1.0, np.abs(signed).max(initial=0.0))
        if mismatch > tol * scale:
            raise InconsistentFieldError(f"shared DoFs disagree by {mismatch:.3e}")
    return out.ravel()


def boundary_values(layout, mesh, field):
    """Exact field values at the fixed velocity DoFs (boundary vertices and midpoints)."""
    V = mesh.n_vertices
    pts = np.empty((layout.n_scalar, 2))
    pts[:V] = mesh.vertices
    pts[V : V + mesh.n_edges] = mesh.vertices[mesh.edges].mean(axis=1)
    scalar = layout.fixed_velocity // 2
    comp = layout.fixed_velocity % 2
    vals = field.value(pts[scalar])
    return vals[np.arange(len(scalar)), comp]


@dataclass
class ReducedSystem:
    """System restricted to the free DoFs plus the lifting of the fixed ones."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    size: int

    def expand(self, x_free):
        x = np.zeros(self.size)
        x[self.free] = x_free
        x[self.fixed] = self.fixed_values
        return x


def apply_constraints(matrix, rhs, fixed, fixed_values=None):
    """Eliminate fixed DoFs; known columns move to the right-hand side."""
    matrix = sp.csr_matrix(matrix)
    n = matrix.shape[0]
    fixed = np.asarray(fixed, dtype=np.int64)
    values = np.zeros(len(fixed)) if fixed_values is None else np.asarray(fixed_values, float)
    if values.shape != fixed.shape:
        raise ValueError("fixed_values must match the fixed DoF list")
    mask = np.ones(n, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    rhs_free = rhs[free] - matrix[free][:, fixed] @ values
    return ReducedSystem(
        matrix=matrix[free][:, free].tocsr(),
        rhs=rhs_free,
        free=free,
        fixed=fixed,
        fixed_values=values,
        size=n,
    )


def evaluate_velocity(layout, mesh, u, bary):
    """Values ``(T, Q, 2)`` of a global velocity at barycentric points of every element."""
    basis = LocalBasis(mesh_geometry(mesh), check=False)
    coeffs = layout.local_coefficients(u)
    tab = element.tabulate(bary)
    vals = basis.values(tab)
    return np.einsum("tqs,tsc->tqc", vals, coeffs)
