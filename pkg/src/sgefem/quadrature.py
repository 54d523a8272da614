"""Quadrature rules on the reference triangle and the unit interval.

Triangle rules are collapsed (conical product) Gauss rules: a Gauss-Jacobi
rule in the collapsed direction times a Gauss-Legendre rule along the
fibres.  They are exact to the requested total degree, have strictly
positive weights and put every point in the interior.  The collapsed vertex
is the first barycentric vertex, which is what lets the same rule integrate
``1/rho`` type singularities located at that vertex.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 14

# degrees used by the solver pipeline
ASSEMBLY_DEGREE = 12
EDGE_DEGREE = 10
ERROR_DEGREE = 14


@dataclass(frozen=True)
class QuadRule:
    """Points and weights of a quadrature rule.

    ``points`` are barycentric coordinates ``(n, 3)`` for triangle rules and
    parameters in ``[0, 1]`` with shape ``(n,)`` for edge rules.  Weights sum
    to the reference measure (1/2 for the triangle, 1 for the edge).
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self):
        return len(self.weights)

    @property
    def xy(self):
        """Cartesian coordinates on the reference triangle (0,0),(1,0),(0,1)."""
        return self.points[:, 1:3]


def _check_degree(degree):
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r} (1..{MAX_DEGREE})")


def edge_rule(degree):
    _check_degree(degree)
    n = degree // 2 + 1
    t, w = np.polynomial.legendre.leggauss(n)
    return QuadRule(0.5 * (t + 1.0), 0.5 * w, int(degree))


def triangle_rule(degree):
    """Collapsed Gauss rule on the reference triangle, exact to ``degree``."""
    _check_degree(degree)
    n = degree // 2 + 1
    # s: distance from the collapsed vertex, carries the Jacobian (1-s)^1
    s, ws = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (s + 1.0)
    ws = 0.25 * ws
    t, wt = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    # map: r = 1-s is the radial coordinate from vertex a1 = (0,0)
    r = 1.0 - s
    R, T = np.meshgrid(r, t, indexing="ij")
    W = np.outer(ws, wt)
    lam2 = R * (1.0 - T)
    lam3 = R * T
    lam1 = 1.0 - lam2 - lam3
    points = np.stack([lam1.ravel(), lam2.ravel(), lam3.ravel()], axis=1)
    return QuadRule(points, W.ravel(), int(degree))


def corner_refined_rule(base, levels, vertex=0):
    """Composite rule graded geometrically towards one vertex.

    Each level cuts the current corner triangle at half its size; the
    trapezoid left behind is split into three triangles of the same scale,
    so the composite partition stays shape regular.  ``base`` is applied on
    every sub-triangle.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    if levels == 0:
        return base
    eye = np.eye(3)
    c = eye[vertex]
    others = [eye[k] for k in range(3) if k != vertex]
    pts, wts = [], []
    p, q = others  # current far edge endpoints, corner triangle (c, p, q)
    for _ in range(levels):
        pm = 0.5 * (c + p)
        qm = 0.5 * (c + q)
        mid = 0.5 * (p + q)
        for tri in ((pm, p, mid), (pm, mid, qm), (qm, mid, q)):
            P, W = _map_rule(base, np.array(tri))
            pts.append(P)
            wts.append(W)
        p, q = pm, qm
    P, W = _map_rule(base, np.array((c, p, q)))
    pts.append(P)
    wts.append(W)
    return QuadRule(np.concatenate(pts), np.concatenate(wts), base.degree)


def _map_rule(base, corners):
    """Map ``base`` onto the sub-triangle with barycentric ``corners``."""
    P = base.points @ corners
    # area ratio of the sub-triangle relative to the reference triangle
    a, b, d = corners[:, 1:3]
    ratio = abs((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
    return P, base.weights * ratio


def rotate(rule, vertex):
    """Relabel barycentric coordinates so the collapsed vertex becomes ``vertex``."""
    if vertex == 0:
        return rule
    perm = (np.arange(3) + vertex) % 3
    P = np.empty_like(rule.points)
    P[:, perm] = rule.points
    return QuadRule(P, rule.weights.copy(), rule.degree)
