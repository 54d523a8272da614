"""The 10-DoF nonconforming triangle and the P1 pressure triangle.

The velocity space on a triangle K is

    P_K = P2(K) + b_K * span{P1(K) + (l1 l2 + l2 l3 + l3 l1)},   b_K = l1 l2 l3,

with degrees of freedom: values at the three vertices, values at the three
edge midpoints, the averages of the outward normal derivative over the three
edges, and the average over K.  Local basis ordering throughout the package
is::

    0-2  vertex functions        phi_i
    3-5  midpoint functions      phi^b_i
    6-8  edge normal moments     psi_i
    9    cell mean               phi_0

Every shape function is a fixed linear combination of ten geometry-free
barycentric polynomials (the "primitives").  Only the combination
coefficients depend on the triangle, so values and derivatives of the
primitives are tabulated once per quadrature rule and mapped to each element
with the constant barycentric gradients.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import LOCAL_EDGES
from .quadrature import edge_rule, triangle_rule

MAXDEG = 5


class BaryPoly:
    """Polynomial in three barycentric variables, degree <= 5 per variable.

    The three coordinates are treated as independent variables; derivatives
    with respect to x are recovered by the chain rule with grad(lambda_i).
    """

    __slots__ = ("c",)

    def __init__(self, coef=None):
        self.c = np.zeros((MAXDEG + 1,) * 3) if coef is None else coef

    @classmethod
    def const(cls, value):
        p = cls()
        p.c[0, 0, 0] = value
        return p

    @classmethod
    def var(cls, i):
        p = cls()
        idx = [0, 0, 0]
        idx[i] = 1
        p.c[tuple(idx)] = 1.0
        return p

    def __add__(self, other):
        other = other if isinstance(other, BaryPoly) else BaryPoly.const(other)
        return BaryPoly(self.c + other.c)

    __radd__ = __add__

    def __neg__(self):
        return BaryPoly(-self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, BaryPoly) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, BaryPoly):
            return BaryPoly(self.c * other)
        out = np.zeros_like(self.c)
        for idx in zip(*np.nonzero(self.c)):
            a, b, d = idx
            shifted = other.c[: MAXDEG + 1 - a, : MAXDEG + 1 - b, : MAXDEG + 1 - d]
            if np.any(other.c[MAXDEG + 1 - a :]) or np.any(other.c[:, MAXDEG + 1 - b :]) or np.any(
                other.c[:, :, MAXDEG + 1 - d :]
            ):
                raise OverflowError("product exceeds the supported degree")
            out[a:, b:, d:] += self.c[idx] * shifted
        return BaryPoly(out)

    __rmul__ = __mul__

    def diff(self, i):
        c = np.moveaxis(self.c, i, 0)
        k = np.arange(1, MAXDEG + 1).reshape(-1, 1, 1)
        d = np.zeros_like(c)
        d[:-1] = c[1:] * k
        return BaryPoly(np.moveaxis(d, 0, i))

    @property
    def degree(self):
        nz = np.argwhere(self.c)
        return int(nz.sum(axis=1).max()) if len(nz) else 0

    def __call__(self, bary):
        bary = np.atleast_2d(bary)
        powers = bary[:, :, None] ** np.arange(MAXDEG + 1)  # (n, 3, 6)
        return np.einsum("abc,na,nb,nc->n", self.c, powers[:, 0], powers[:, 1], powers[:, 2])


def _primitive_polys():
    l1, l2, l3 = (BaryPoly.var(i) for i in range(3))
    lam = (l1, l2, l3)
    b = l1 * l2 * l3
    sigma = l1 * l2 + l2 * l3 + l3 * l1
    prims = []
    for i in range(3):
        prims.append(lam[i] * (2.0 * lam[i] - 1.0))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        prims.append(4.0 * lam[j] * lam[k])
    for i in range(3):
        prims.append(b * (2.0 * lam[i] - 1.0))
    prims.append(140.0 * b * (5.0 * sigma - 1.0))
    return prims


PRIMITIVES = _primitive_polys()


@dataclass(frozen=True)
class Tabulation:
    """Primitive values and barycentric derivatives at fixed barycentric points."""

    points: np.ndarray  # (Q, 3)
    values: np.ndarray  # (Q, 10)
    d1: np.ndarray  # (Q, 10, 3)
    d2: np.ndarray  # (Q, 10, 3, 3)


def tabulate(points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.stack([p(points) for p in PRIMITIVES], axis=1)
    d1 = np.empty((len(points), 10, 3))
    d2 = np.empty((len(points), 10, 3, 3))
    for s, p in enumerate(PRIMITIVES):
        for i in range(3):
            pi = p.diff(i)
            d1[:, s, i] = pi(points)
            for j in range(i, 3):
                d2[:, s, i, j] = d2[:, s, j, i] = pi.diff(j)(points)
    return Tabulation(points, values, d1, d2)


@lru_cache(maxsize=None)
def tabulate_rule(degree):
    rule = triangle_rule(degree)
    return rule, tabulate(rule.points)


class ReferenceGeometry:
    """Affine data of a batch of triangles.

    Holds barycentric gradients, edge lengths, midpoints and outward unit
    normals for ``(T, 3, 2)`` vertex coordinates.  A single triangle is a
    batch of one.
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim == 2:
            v = v[None]
        self.vertices = v
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        scale = np.abs(v.reshape(len(v), -1)).max(axis=1) + 1.0
        if np.any(np.abs(det) <= 1e-14 * scale**2):
            raise ValueError("degenerate triangle")
        self.area = 0.5 * np.abs(det)
        self.orientation = np.sign(det)
        # edge i runs a_{i+1} -> a_{i+2}
        tang = v[:, LOCAL_EDGES[:, 1]] - v[:, LOCAL_EDGES[:, 0]]  # (T, 3, 2)
        self.edge_lengths = np.linalg.norm(tang, axis=2)
        self.midpoints = 0.5 * (v[:, LOCAL_EDGES[:, 1]] + v[:, LOCAL_EDGES[:, 0]])
        # grad(lambda_i) = (rot of edge tangent) / (2 det), pointing into K
        rot = np.stack([-tang[..., 1], tang[..., 0]], axis=-1)
        self.grad_lambda = rot / det[:, None, None]
        self.grad_norm = np.linalg.norm(self.grad_lambda, axis=2)
        self.normals = -self.grad_lambda / self.grad_norm[..., None]

    def __len__(self):
        return len(self.vertices)

    def to_physical(self, bary):
        """Map barycentric points ``(Q, 3)`` to ``(T, Q, 2)`` physical points."""
        return np.einsum("qi,tid->tqd", bary, self.vertices)

    def barycentric(self, x):
        """Barycentric coordinates of physical points ``(T, Q, 2)``."""
        rel = x - self.vertices[:, None, 0]
        l23 = np.einsum("tqd,tid->tqi", rel, self.grad_lambda[:, 1:])
        return np.concatenate([1.0 - l23.sum(axis=2, keepdims=True), l23], axis=2)


def shape_coefficients(geom):
    """Coefficients ``C`` with ``shape_s = sum_r C[s, r] * primitive_r``, shape ``(T, 10, 10)``."""
    T = len(geom)
    g = geom.grad_norm  # (T, 3)
    G = geom.grad_lambda
    C = np.zeros((T, 10, 10))
    # cell mean
    C[:, 9, 9] = 1.0
    # edge normal moments
    psi = np.zeros((T, 3, 10))
    for i in range(3):
        psi[:, i, 6 + i] = 6.0 / g[:, i]
        psi[:, i, 9] = 1.0 / (30.0 * g[:, i])
    C[:, 6:9] = psi
    # vertex functions
    for i in range(3):
        row = np.zeros((T, 10))
        row[:, i] = 1.0
        row -= g[:, i, None] * psi[:, i]
        for j in range(3):
            if j != i:
                coef = np.einsum("td,td->t", G[:, i], G[:, j]) / g[:, j]
                row += coef[:, None] * psi[:, j]
        C[:, i] = row
    # midpoint functions: 4 l_j l_k + 12 b (1 - 4 l_i) - 4/15 phi_0,
    # with b (1 - 4 l_i) = -2 B_i + (B_1 + B_2 + B_3)
    for i in range(3):
        C[:, 3 + i, 3 + i] = 1.0
        C[:, 3 + i, 6:9] = 12.0
        C[:, 3 + i, 6 + i] -= 24.0
        C[:, 3 + i, 9] = -4.0 / 15.0
    return C


class LocalBasis:
    """Shape functions of the 10-DoF element on a batch of triangles."""

    def __init__(self, geom, check=True, tol=1e-10):
        self.geom = geom
        self.coef = shape_coefficients(geom)
        if check:
            D = dof_matrix(self)
            err = np.abs(D - np.eye(10)).max(axis=(1, 2))
            if np.any(err > tol):
                raise ValueError(
                    f"biorthogonality check failed (max deviation {err.max():.2e}); "
                    "DoF normalisation or shape formulas are inconsistent"
                )

    def __len__(self):
        return len(self.geom)

    def values(self, tab):
        return np.einsum("tsr,qr->tqs", self.coef, tab.values)

    def gradients(self, tab):
        T, Q = len(self.geom), len(tab.points)
        dprim = np.matmul(tab.d1.reshape(Q * 10, 3), self.geom.grad_lambda)  # (T, Q*10, 2)
        return np.matmul(self.coef[:, None], dprim.reshape(T, Q, 10, 2))

    def hessians(self, tab):
        G = self.geom.grad_lambda
        T, Q = len(G), len(tab.points)
        GG = np.einsum("tid,tje->tijde", G, G).reshape(T, 9, 4)
        hprim = np.matmul(tab.d2.reshape(Q * 10, 9), GG)  # (T, Q*10, 4)
        hprim = hprim.reshape(T, Q, 10, 4)
        out = np.matmul(self.coef[:, None], hprim)  # (T, Q, 10, 4)
        return out.reshape(T, Q, 10, 2, 2)

    def evaluate(self, coeffs, bary):
        """Values of the local functions with ``coeffs (T, 10)`` at ``bary (Q, 3)``."""
        tab = tabulate(bary)
        return np.einsum("ts,tqs->tq", coeffs, self.values(tab))


def _edge_points(rule):
    """Barycentric points on each local edge, ``(3, Q, 3)``, running a_{i+1} -> a_{i+2}."""
    t = rule.points
    pts = np.zeros((3, len(t), 3))
    for i, (a, b) in enumerate(LOCAL_EDGES):
        pts[i, :, a] = 1.0 - t
        pts[i, :, b] = t
    return pts


VERTEX_BARY = np.eye(3)
MIDPOINT_BARY = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])


def dof_matrix(basis):
    """DoF functionals applied to each shape function: ``D[t, k, s]``."""
    geom = basis.geom
    T = len(geom)
    D = np.zeros((T, 10, 10))
    D[:, 0:3] = basis.values(tabulate(VERTEX_BARY))
    D[:, 3:6] = basis.values(tabulate(MIDPOINT_BARY))
    erule = edge_rule(6)
    epts = _edge_points(erule)
    for i in range(3):
        grads = basis.gradients(tabulate(epts[i]))  # (T, Q, 10, 2)
        dn = np.einsum("tqsd,td->tqs", grads, geom.normals[:, i])
        D[:, 6 + i] = np.einsum("q,tqs->ts", erule.weights, dn)
    rule, tab = tabulate_rule(6)
    D[:, 9] = 2.0 * np.einsum("q,tqs->ts", rule.weights, basis.values(tab))
    return D


def dof_functionals(geom, f, grad_f, edge_degree=10, cell_degree=12):
    """Apply the ten DoF functionals to a field.

    ``f(x)`` and ``grad_f(x)`` take physical points ``(T, Q, 2)`` and return
    ``(T, Q)`` and ``(T, Q, 2)``.  Edge moments and the cell moment are
    averages, returned as ``(T, 10)``.
    """
    T = len(geom)
    out = np.empty((T, 10))
    out[:, 0:3] = f(geom.vertices)
    out[:, 3:6] = f(geom.midpoints)
    erule = edge_rule(edge_degree)
    epts = _edge_points(erule)
    for i in range(3):
        x = geom.to_physical(epts[i])
        dn = np.einsum("tqd,td->tq", grad_f(x), geom.normals[:, i])
        out[:, 6 + i] = dn @ erule.weights
    rule = triangle_rule(cell_degree)
    out[:, 9] = 2.0 * (f(geom.to_physical(rule.points)) @ rule.weights)
    return out


def interpolate_local(geom, f, grad_f, **kwargs):
    """Coefficients of the local interpolant: the DoFs of ``f`` in the shape basis."""
    return dof_functionals(geom, f, grad_f, **kwargs)


def p1_values(bary):
    """Nodal P1 functions are the barycentric coordinates themselves."""
    return np.atleast_2d(bary)


def p1_gradients(geom):
    return geom.grad_lambda
