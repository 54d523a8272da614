"""Probes of the discrete Hardy inequality in the critical case ``p = d``.

Three experiments:

* the radial profile ``f_0`` (piecewise linear, slope ``1/i`` on the i-th
  of ``n`` equal intervals) whose Hardy quotient grows like ``log(1/h)``;
  its norms are integrated in closed form;
* the finite element Hardy quotient of piecewise-P1 (possibly
  discontinuous) fields on polar disk meshes, split into the gradient and
  the interior-jump contributions;
* the weighted corner seminorm ``sum_a int q^2 / |x - a|^2`` of P1
  pressures against ``||grad q||`` on the unit square.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import quadrature
from .element import ReferenceGeometry
from .linalg import power_largest, to_csr

SPHERE_MEASURE = {1: 2.0, 2: 2.0 * np.pi}


@dataclass(frozen=True)
class RadialProfile:
    """``f_0(0) = 0`` and ``f_0' = 1/i`` on ``((i - 1) h, i h)``, ``h = 1/n``."""

    n: int
    d: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.d not in (1, 2):
            raise ValueError("only d = 1 and d = 2 are supported")

    @property
    def h(self):
        return 1.0 / self.n

    def nodal_values(self):
        """``f_0(i h) = h * H_i`` for ``i = 0..n`` (``H_i`` harmonic numbers)."""
        return self.h * np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, self.n + 1))])

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.interp(rho, np.linspace(0.0, 1.0, self.n + 1), self.nodal_values())


@dataclass
class RadialNorms:
    hardy: float  # ||f / rho||_{L^d}
    gradient: float  # ||grad f||_{L^d}
    n: int
    d: int

    @property
    def ratio(self):
        return self.hardy / self.gradient

    @property
    def h(self):
        return 1.0 / self.n


def radial_norms(profile, normalize=True):
    """Closed-form ``L^d`` norms of ``f_0(|x|)/|x|`` and ``grad f_0(|x|)`` on the unit ball.

    On the i-th interval ``f_0 = rho / i + k_i`` with
    ``k_i = h H_{i-1} - (i - 1) h / i``, so every piece integrates to
    elementary terms.  With ``normalize`` the integrals are divided by the
    measure of the unit sphere, which reduces them to one-dimensional
    radial integrals.
    """
    n, d, h = profile.n, profile.d, profile.h
    i = np.arange(1, n + 1, dtype=float)
    H_prev = np.concatenate([[0.0], np.cumsum(1.0 / i)[:-1]])
    k = h * H_prev - (i - 1.0) * h / i
    # log(b / a) on each interval; the first interval has k = 0
    log_ratio = np.zeros(n)
    log_ratio[1:] = np.log(i[1:] / (i[1:] - 1.0))
    if d == 1:
        hardy = np.sum(h / i + k * log_ratio)
        grad = np.sum(h / i)
    else:
        a, b = (i - 1.0) * h, i * h
        hardy = np.sum((b**2 - a**2) / (2.0 * i**2) + 2.0 * k * h / i + k**2 * log_ratio)
        grad = np.sum((b**2 - a**2) / (2.0 * i**2))
    scale = 1.0 if normalize else SPHERE_MEASURE[d]
    return RadialNorms(
        hardy=float((scale * hardy) ** (1.0 / d)),
        gradient=float((scale * grad) ** (1.0 / d)),
        n=n,
        d=d,
    )


@dataclass
class ExponentFit:
    slope: float
    intercept: float

    def predict(self, h):
        return np.exp(self.intercept) * h * np.log(1.0 / np.asarray(h)) ** self.slope


def fit_log_exponent(h, values):
    """Least-squares ``p`` in ``values ~ C h log^p(1/h)``."""
    h = np.asarray(h, dtype=float)
    y = np.log(np.asarray(values, dtype=float) / h)
    x = np.log(np.log(1.0 / h))
    slope, intercept = np.polyfit(x, y, 1)
    return ExponentFit(float(slope), float(intercept))


def fit_ratio_exponent(h, ratios):
    """Slope of ``log(ratio)`` against ``log log(1/h)``; 1 for a pure log factor."""
    h = np.asarray(h, dtype=float)
    slope, intercept = np.polyfit(np.log(np.log(1.0 / h)), np.log(ratios), 1)
    return ExponentFit(float(slope), float(intercept))


def radial_study(ks=range(3, 11), d=2):
    """Closed-form norms for ``n = 2^k`` and the fitted log exponents."""
    rows = [radial_norms(RadialProfile(2**k, d)) for k in ks]
    h = np.array([r.h for r in rows])
    return {
        "rows": rows,
        "hardy_fit": fit_log_exponent(h, [r.hardy for r in rows]),
        "gradient_fit": fit_log_exponent(h, [r.gradient for r in rows]),
        "ratio_fit": fit_ratio_exponent(h, [r.ratio for r in rows]),
        "ratio_over_log": np.array([r.ratio / np.log(1.0 / r.h) for r in rows]),
    }


# ----------------------------------------------------------------------------
# finite element Hardy quotient on disk meshes


@dataclass
class HardyTerms:
    lhs: float  # ||f / rho||_{L^2}
    gradient: float  # ||grad_h f||_{L^2}
    jump: float  # (sum_F ||[f]||_{L^inf(F)}^2)^{1/2}

    @property
    def rhs(self):
        return self.gradient + self.jump

    def constant(self, h):
        """Smallest ``C`` with ``lhs <= C log(1/h) rhs``."""
        return self.lhs / (np.log(1.0 / h) * self.rhs) if self.rhs > 0 else np.inf


def _singular_groups(geom, point, base, levels):
    """Element groups with rules: corner-refined toward ``point`` where it is a vertex."""
    hit = np.isclose(geom.vertices, point, atol=1e-14).all(axis=2)
    groups = [(np.flatnonzero(~hit.any(axis=1)), base)]
    for v in range(3):
        idx = np.flatnonzero(hit[:, v])
        if len(idx):
            groups.append((idx, quadrature.corner_refined_rule(base, levels, vertex=v)))
    return groups


def fe_hardy_ratio(mesh, coeffs, origin=(0.0, 0.0), levels=8, degree=quadrature.MAX_DEGREE):
    """Hardy quotient terms of an elementwise P1 field.

    ``coeffs`` are ``(T, 3)`` vertex values per element (discontinuous
    fields allowed).  The field must vanish at the origin on every element
    containing it.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (mesh.n_triangles, 3):
        raise ValueError("coeffs must have shape (n_triangles, 3)")
    origin = np.asarray(origin, dtype=float)
    at_origin = np.isclose(mesh.triangle_vertices(), origin, atol=1e-14).all(axis=2)
    if np.any(np.abs(coeffs[at_origin]) > 1e-14):
        raise ValueError("field must vanish at the origin")
    geom = ReferenceGeometry(mesh.triangle_vertices())
    base = quadrature.triangle_rule(degree)
    lhs = 0.0
    for idx, rule in _singular_groups(geom, origin, base, levels):
        if len(idx) == 0:
            continue
        x = np.einsum("qi,tid->tqd", rule.points, geom.vertices[idx])
        rho2 = ((x - origin) ** 2).sum(axis=2)
        f = coeffs[idx] @ rule.points.T
        lhs += float(np.sum(2.0 * geom.area[idx, None] * rule.weights * f**2 / rho2))
    grads = np.einsum("ti,tid->td", coeffs, geom.grad_lambda)
    gradient = float(np.sqrt(np.sum(geom.area * (grads**2).sum(axis=1))))
    return HardyTerms(lhs=float(np.sqrt(lhs)), gradient=gradient, jump=_jump_term(mesh, coeffs))


def _jump_term(mesh, coeffs):
    """``(sum_F max_F |f^+ - f^-|^2)^{1/2}``; endpoint values are exact for P1 traces."""
    interior = np.flatnonzero(~mesh.boundary_edge)
    ends = mesh.edges[interior]
    traces = []
    for side in (0, 1):
        t = mesh.edge_triangles[interior, side]
        tri = mesh.triangles[t]
        at_a = np.argmax(tri == ends[:, :1], axis=1)
        at_b = np.argmax(tri == ends[:, 1:], axis=1)
        traces.append(np.stack([coeffs[t, at_a], coeffs[t, at_b]], axis=1))
    diff = np.abs(traces[0] - traces[1]).max(axis=1)
    return float(np.sqrt(np.sum(diff**2)))


def interpolate_radial(mesh, profile):
    """Continuous P1 interpolant of ``f_0(|x|)`` as ``(T, 3)`` element values."""
    r = np.linalg.norm(mesh.vertices, axis=1)
    return profile(r)[mesh.triangles]


def hardy_profile_study(ring_counts=(4, 8, 16, 32), sectors_per_ring=8):
    """FE quotient of the interpolated radial profile on a ladder of disk meshes."""
    from .mesh import build_polar_disk

    out = []
    for n in ring_counts:
        mesh = build_polar_disk(n, sectors_per_ring * n)
        prof = RadialProfile(n, 2)
        terms = fe_hardy_ratio(mesh, interpolate_radial(mesh, prof))
        out.append((n, mesh.h, terms, radial_norms(prof, normalize=False)))
    return out


# ----------------------------------------------------------------------------
# weighted corner seminorm


def weighted_corner_mass(mesh, levels=8, degree=quadrature.MAX_DEGREE):
    """P1 Gram matrix of ``sum_a int q r / |x - a|^2`` over the domain corners ``a``."""
    geom = ReferenceGeometry(mesh.triangle_vertices())
    base = quadrature.triangle_rule(degree)
    T = mesh.n_triangles
    local = np.zeros((T, 3, 3))
    for a in mesh.vertices[mesh.corners]:
        for idx, rule in _singular_groups(geom, a, base, levels):
            if len(idx) == 0:
                continue
            x = np.einsum("qi,tid->tqd", rule.points, geom.vertices[idx])
            w = 2.0 * geom.area[idx, None] * rule.weights / ((x - a) ** 2).sum(axis=2)
            local[idx] += np.einsum("tq,qi,qj->tij", w, rule.points, rule.points)
    rows = np.broadcast_to(mesh.triangles[:, :, None], (T, 3, 3))
    cols = np.broadcast_to(mesh.triangles[:, None, :], (T, 3, 3))
    n = mesh.n_vertices
    return to_csr(rows, cols, local, (n, n))


def p1_stiffness(mesh):
    geom = ReferenceGeometry(mesh.triangle_vertices())
    G = geom.grad_lambda
    local = geom.area[:, None, None] * np.einsum("tid,tjd->tij", G, G)
    T = mesh.n_triangles
    rows = np.broadcast_to(mesh.triangles[:, :, None], (T, 3, 3))
    cols = np.broadcast_to(mesh.triangles[:, None, :], (T, 3, 3))
    return to_csr(rows, cols, local, (mesh.n_vertices, mesh.n_vertices))


def p1_mean(mesh):
    area = np.abs(mesh.signed_areas())
    return np.bincount(mesh.triangles.ravel(), weights=np.repeat(area / 3.0, 3), minlength=mesh.n_vertices)


@dataclass
class SeminormResult:
    ratio: float  # max [q]_{H^1_+} / ||grad q||
    h: float
    iterations: int
    converged: bool
    vector: np.ndarray = None

    @property
    def ratio_over_log(self):
        return self.ratio / np.log(1.0 / self.h)


def pressure_subspace(mesh):
    """Orthonormal basis of P1 fields vanishing at the corners with zero mean."""
    free = np.setdiff1d(np.arange(mesh.n_vertices), mesh.corners)
    Z = sla.null_space(p1_mean(mesh)[free][None, :])
    return free, Z


def corner_seminorm_ratio(mesh, levels=8, tol=1e-8, maxiter=2000):
    """``max_q [q]_{H^1_+} / ||grad q||`` over corner-pinned, mean-free P1 fields."""
    free, Z = pressure_subspace(mesh)
    W = weighted_corner_mass(mesh, levels)[free][:, free]
    S = p1_stiffness(mesh)[free][:, free]
    Wz = Z.T @ (W @ Z)
    Sz = Z.T @ (S @ Z)
    chol = sla.cho_factor(Sz)
    res = power_largest(
        Wz, lambda r: sla.cho_solve(chol, r), n=Wz.shape[0], block=4, tol=tol, maxiter=maxiter
    )
    q = np.zeros(mesh.n_vertices)
    q[free] = Z @ res.vector
    return SeminormResult(
        ratio=float(np.sqrt(res.value)),
        h=mesh.h,
        iterations=res.iterations,
        converged=res.converged,
        vector=q,
    )


def rayleigh_quotient(mesh, q, levels=8):
    """``[q]_{H^1_+} / ||grad q||`` of one P1 field (vertex values)."""
    W = weighted_corner_mass(mesh, levels)
    S = p1_stiffness(mesh)
    return float(np.sqrt((q @ (W @ q)) / (q @ (S @ q))))
