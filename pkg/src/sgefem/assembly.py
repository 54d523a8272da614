"""Bilinear forms, loads, the saddle-point system and error norms.

The discrete problem couples the velocity space V_h (10-DoF element, two
components) with the P1 pressure space P_h:

    a(u, v) + b(v, p)          = (f, v) + natural boundary term
    b(u, q) - c(p, q) / lam    = 0

with

    a(v, w) = 2 mu [(eps v, eps w) + iota^2 (grad_h eps v, grad_h eps w)]
    b(v, q) = (div v, q) + iota^2 (grad_h div v, grad q)
    c(p, q) = (p, q) + iota^2 (grad p, grad q).

Every form is linear in ``iota^2`` and in the material constants, so the
mesh-dependent pieces are assembled once (:class:`FormParts`) and combined
for each parameter set.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import element, quadrature
from .element import LocalBasis, ReferenceGeometry
from .linalg import RESIDUAL_TOL, solve_indefinite, symmetry_error, to_csr
from .mesh import LOCAL_EDGES
from .space import apply_constraints, boundary_values, build_layout, mesh_geometry

log = logging.getLogger(__name__)

CHUNK = 1024


def _chunks(n, size=CHUNK):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def _vector_local(O_grad, O_hess):
    """Local 20x20 blocks from the outer-product sums ``O[t, s, d, r, c]``.

    Returns the matrices of ``(eps, eps)`` scaled by 2 and of
    ``(grad eps, grad eps)`` scaled by 2, indexed ``[t, 2s + c, 2r + d]``.
    """
    out = []
    eye = np.eye(2)
    for O in (O_grad, O_hess):
        trace = np.einsum("tsere->tsr", O)
        # [s, c, r, d] = delta_cd * trace[s, r] + O[s, d, r, c]
        loc = np.einsum("tsr,cd->tscrd", trace, eye) + O.transpose(0, 1, 4, 3, 2)
        out.append(loc.reshape(len(O), 20, 20))
    return out


def _gram_local(O):
    """Componentwise Gram blocks ``delta_cd * trace(O)[s, r]``."""
    trace = np.einsum("tsere->tsr", O)
    return np.einsum("tsr,cd->tscrd", trace, np.eye(2)).reshape(len(O), 20, 20)


@dataclass
class FormParts:
    """Parameter-free pieces of the discrete forms on one mesh.

    ``A = mu * (A_eps + iota^2 A_hess)``, ``B = B_div + iota^2 B_grad``,
    ``C = mass + iota^2 stiffness``.  ``gram_grad``/``gram_hess`` are the
    broken H1/H2 seminorm Gram matrices (only built on request).
    """

    mesh: object
    layout: object
    A_eps: sp.csr_matrix
    A_hess: sp.csr_matrix
    B_div: sp.csr_matrix
    B_grad: sp.csr_matrix
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    mean: np.ndarray
    gram_grad: sp.csr_matrix = None
    gram_hess: sp.csr_matrix = None
    degree: int = quadrature.ASSEMBLY_DEGREE

    def velocity(self, iota, mu):
        return (mu * (self.A_eps + iota**2 * self.A_hess)).tocsr()

    def coupling(self, iota):
        return (self.B_div + iota**2 * self.B_grad).tocsr()

    def pressure(self, iota):
        return (self.mass + iota**2 * self.stiffness).tocsr()


def assemble_parts(mesh, layout=None, degree=quadrature.ASSEMBLY_DEGREE, gram=False):
    """Assemble all parameter-free form pieces with a degree-``degree`` rule."""
    layout = build_layout(mesh) if layout is None else layout
    geom_all = mesh_geometry(mesh)
    rule, tab = element.tabulate_rule(degree)
    Q = rule.size
    vmap = layout.vector_map()
    vsign = layout.vector_sign().astype(float)
    T = mesh.n_triangles

    blocks = {k: [] for k in ("A_eps", "A_hess", "B_div", "B_grad", "gram_grad", "gram_hess")}
    for sl in _chunks(T):
        geom = ReferenceGeometry(geom_all.vertices[sl])
        basis = LocalBasis(geom, check=False)
        t = len(geom)
        w = rule.weights * 2.0  # reference weights sum to 1/2
        wq = w[None, :] * geom.area[:, None]  # (t, Q)
        g = basis.gradients(tab)  # (t, Q, 10, 2)
        H = basis.hessians(tab)  # (t, Q, 10, 2, 2)

        # O[s, d, r, c] = sum_q w gs[d] gr[c]
        gs = g.transpose(0, 2, 3, 1).reshape(t, 20, Q)
        O_grad = np.matmul(gs * wq[:, None, :], gs.transpose(0, 2, 1)).reshape(t, 10, 2, 10, 2)
        # O[s, d, r, c] = sum_q w sum_k Hs[d, k] Hr[c, k]
        hs = H.transpose(0, 2, 3, 1, 4).reshape(t, 20, 2 * Q)
        wh = np.repeat(wq, 2, axis=1)
        O_hess = np.matmul(hs * wh[:, None, :], hs.transpose(0, 2, 1)).reshape(t, 10, 2, 10, 2)
        A_eps, A_hess = _vector_local(O_grad, O_hess)
        blocks["A_eps"].append(A_eps)
        blocks["A_hess"].append(A_hess)
        if gram:
            blocks["gram_grad"].append(_gram_local(O_grad))
            blocks["gram_hess"].append(_gram_local(O_hess))

        # (div v, q): lambda_j * d_c phi_s ; (grad div v, grad q): H_s[c, :] . grad lambda_j
        lam_q = rule.points  # (Q, 3)
        B_div = np.einsum("tq,qj,tqsc->tjsc", wq, lam_q, g).reshape(t, 3, 20)
        B_grad = np.einsum("tq,tqsck,tjk->tjsc", wq, H, geom.grad_lambda).reshape(t, 3, 20)
        blocks["B_div"].append(B_div)
        blocks["B_grad"].append(B_grad)

    nv, npr = layout.n_velocity, layout.n_pressure
    sign2 = vsign[:, :, None] * vsign[:, None, :]
    rows_vv = np.broadcast_to(vmap[:, :, None], (T, 20, 20))
    cols_vv = np.broadcast_to(vmap[:, None, :], (T, 20, 20))
    pmap = mesh.triangles
    rows_pv = np.broadcast_to(pmap[:, :, None], (T, 3, 20))
    cols_pv = np.broadcast_to(vmap[:, None, :], (T, 3, 20))

    def vv(name):
        vals = np.concatenate(blocks[name]) * sign2
        return to_csr(rows_vv, cols_vv, vals, (nv, nv))

    def pv(name):
        vals = np.concatenate(blocks[name]) * vsign[:, None, :]
        return to_csr(rows_pv, cols_pv, vals, (npr, nv))

    area = geom_all.area
    G = geom_all.grad_lambda
    mass_loc = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    stiff_loc = area[:, None, None] * np.einsum("tid,tjd->tij", G, G)
    rows_pp = np.broadcast_to(pmap[:, :, None], (T, 3, 3))
    cols_pp = np.broadcast_to(pmap[:, None, :], (T, 3, 3))
    mean = np.bincount(pmap.ravel(), weights=np.repeat(area / 3.0, 3), minlength=npr)

    return FormParts(
        mesh=mesh,
        layout=layout,
        A_eps=vv("A_eps"),
        A_hess=vv("A_hess"),
        B_div=pv("B_div"),
        B_grad=pv("B_grad"),
        mass=to_csr(rows_pp, cols_pp, mass_loc, (npr, npr)),
        stiffness=to_csr(rows_pp, cols_pp, stiff_loc, (npr, npr)),
        mean=mean,
        gram_grad=vv("gram_grad") if gram else None,
        gram_hess=vv("gram_hess") if gram else None,
        degree=degree,
    )


@dataclass
class SaddleSystem:
    """Block system ``[[A, B^T], [B, -C / lam]]`` with load and constraints.

    Unknowns are ordered velocity first, then pressure.  ``mean_constraint``
    appends one Lagrange multiplier enforcing ``int p = 0``.
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    iota: float
    lam: float
    mu: float
    layout: object
    mean: np.ndarray
    F: np.ndarray = None
    velocity_values: np.ndarray = None  # values at layout.fixed_velocity
    pressure_values: np.ndarray = None  # values at layout.fixed_pressure (corners)
    mean_constraint: bool = True
    info: dict = field(default_factory=dict)

    @property
    def n_velocity(self):
        return self.A.shape[0]

    @property
    def n_pressure(self):
        return self.C.shape[0]

    def matrix(self):
        return sp.bmat([[self.A, self.B.T], [self.B, -self.C / self.lam]], format="csr")

    def symmetry_error(self):
        return symmetry_error(self.matrix())

    def fixed(self):
        nv = self.n_velocity
        return np.concatenate([self.layout.fixed_velocity, nv + self.layout.fixed_pressure])

    def fixed_values(self):
        vel = (
            np.zeros(len(self.layout.fixed_velocity))
            if self.velocity_values is None
            else self.velocity_values
        )
        pre = (
            np.zeros(len(self.layout.fixed_pressure))
            if self.pressure_values is None
            else self.pressure_values
        )
        return np.concatenate([vel, pre])

    def reduced(self):
        """Eliminate fixed DoFs; the mean row is returned as a border vector."""
        if self.F is None:
            raise ValueError("system has no load; call assemble_load first")
        rhs = np.concatenate([self.F, np.zeros(self.n_pressure)])
        red = apply_constraints(self.matrix(), rhs, self.fixed(), self.fixed_values())
        border = None
        if self.mean_constraint:
            m = np.zeros(self.n_velocity + self.n_pressure)
            m[self.n_velocity :] = self.mean
            border = m[red.free]
        return red, border

    def solve(self, tol=RESIDUAL_TOL):
        red, border = self.reduced()
        res = solve_indefinite(red.matrix, red.rhs, tol=tol, border=border)
        x = red.expand(res.x)
        nv = self.n_velocity
        return x[:nv], x[nv:], res


def assemble(mesh, layout, iota, lam, mu, parts=None):
    """Saddle system without load for one parameter set."""
    if not 0.0 < iota <= 1.0:
        raise ValueError("iota must lie in (0, 1]")
    if lam <= 0 or mu <= 0:
        raise ValueError("Lame constants must be positive")
    parts = assemble_parts(mesh, layout) if parts is None else parts
    return SaddleSystem(
        A=parts.velocity(iota, mu),
        B=parts.coupling(iota),
        C=parts.pressure(iota),
        iota=iota,
        lam=lam,
        mu=mu,
        layout=parts.layout,
        mean=parts.mean,
    )


def volume_load(mesh, layout, fn, degree=quadrature.ERROR_DEGREE):
    """``int fn . v_i`` for every velocity basis function, ``fn(x) -> (..., 2)``."""
    geom_all = mesh_geometry(mesh)
    rule, tab = element.tabulate_rule(degree)
    out = np.zeros(layout.n_velocity)
    for sl in _chunks(mesh.n_triangles):
        geom = ReferenceGeometry(geom_all.vertices[sl])
        basis = LocalBasis(geom, check=False)
        x = geom.to_physical(rule.points)
        wq = 2.0 * rule.weights[None, :] * geom.area[:, None]
        vals = fn(x) * wq[..., None]
        part = _sub_layout_load(layout, sl, vals, basis.values(tab))
        out += part
    return out


def _sub_layout_load(layout, sl, vals, phi):
    loc = np.einsum("tqc,tqs->tsc", vals, phi) * layout.scalar_sign[sl][..., None]
    out = np.zeros((layout.n_scalar, 2))
    np.add.at(out, layout.scalar_map[sl], loc)
    return out.ravel()


def _edge_parameter_rule(degree, singular_end=None):
    """Edge nodes/weights on [0, 1]; ``t = s^2`` grading toward a singular end."""
    rule = quadrature.edge_rule(degree)
    s, w = rule.points, rule.weights
    if singular_end is None:
        return s, w
    t = s**2
    wt = 2.0 * s * w
    return (t, wt) if singular_end == 0 else (1.0 - t, wt)


def boundary_load(mesh, layout, traction, degree=quadrature.EDGE_DEGREE, singular_point=None):
    """``int_{boundary} g . d_n v_i`` with ``g = traction(x, n)`` on boundary edges.

    Edges ending at ``singular_point`` use the substitution ``t = s^2``,
    which absorbs an inverse square-root endpoint singularity.
    """
    bnd = np.flatnonzero(mesh.boundary_edge)
    tri = mesh.edge_triangles[bnd, 0]
    local = np.argmax(mesh.tri_edges[tri] == bnd[:, None], axis=1)
    geom = ReferenceGeometry(mesh.vertices[mesh.triangles[tri]])
    coef = element.shape_coefficients(geom)
    # end of the local edge (0: start, 1: finish) sitting on the singular point, -1 if none
    end = -np.ones(len(bnd), dtype=int)
    if singular_point is not None:
        for slot in (0, 1):
            pts = geom.vertices[np.arange(len(bnd)), LOCAL_EDGES[local, slot]]
            end[np.isclose(pts, singular_point, atol=1e-14).all(axis=1)] = slot
    out = np.zeros((layout.n_scalar, 2))
    for i in range(3):
        a, b = LOCAL_EDGES[i]
        for e in (-1, 0, 1):
            sel = np.flatnonzero((local == i) & (end == e))
            if len(sel) == 0:
                continue
            t, w = _edge_parameter_rule(degree, None if e < 0 else e)
            bary = np.zeros((len(t), 3))
            bary[:, a] = 1.0 - t
            bary[:, b] = t
            sub = ReferenceGeometry(geom.vertices[sel])
            basis = LocalBasis.__new__(LocalBasis)
            basis.geom, basis.coef = sub, coef[sel]
            x = sub.to_physical(bary)  # (m, Q, 2)
            normal = sub.normals[:, i]  # (m, 2)
            g = traction(x, normal[:, None, :])  # (m, Q, 2)
            dn = np.einsum("mqsd,md->mqs", basis.gradients(element.tabulate(bary)), normal)
            wl = w[None, :] * sub.edge_lengths[:, i, None]
            loc = np.einsum("mq,mqc,mqs->msc", wl, g, dn) * layout.scalar_sign[tri[sel]][..., None]
            np.add.at(out, layout.scalar_map[tri[sel]], loc)
    return out.ravel()


def assemble_load(mesh, layout, case, iota=None, degree=quadrature.ERROR_DEGREE):
    """Load vector ``(f, v) + iota^2 int (d_n C eps(u) n) . d_n v`` of a case."""
    iota = case.iota if iota is None else iota
    F = np.zeros(layout.n_velocity)
    if not case.load_vanishes:
        F += volume_load(mesh, layout, case.load_low, degree)
        if case.exprs["f_high"] is not None:
            F += iota**2 * volume_load(mesh, layout, case.load_high, degree)
    if case.has_boundary_traction:
        origin = np.zeros(2) if case.singular_origin else None
        F += iota**2 * boundary_load(mesh, layout, case.boundary_traction, singular_point=origin)
    return F


CORNER_PRESSURE_MODES = ("exact", "zero")


def build_system(mesh, case, parts=None, layout=None, corner_pressure="exact"):
    """Saddle system with load and boundary data for a manufactured case.

    With inhomogeneous data the boundary vertex/midpoint velocities take the
    exact values.  ``corner_pressure`` selects the corner pressure values:
    ``"exact"`` pins them to the exact pressure (zero for the homogeneous
    cases), ``"zero"`` pins them to zero regardless of the data.
    """
    if corner_pressure not in CORNER_PRESSURE_MODES:
        raise ValueError(f"corner_pressure must be one of {CORNER_PRESSURE_MODES}")
    if parts is None:
        parts = assemble_parts(mesh, layout)
    layout = parts.layout
    system = assemble(mesh, layout, case.iota, case.lam, case.mu, parts=parts)
    system.F = assemble_load(mesh, layout, case)
    if not case.homogeneous:
        system.velocity_values = boundary_values(layout, mesh, case)
        if corner_pressure == "exact":
            system.pressure_values = case.pressure(mesh.vertices[layout.fixed_pressure])
    system.mean_constraint = case.zero_mean_pressure
    system.info["corner_pressure"] = corner_pressure
    return system


# ----------------------------------------------------------------------------
# error norms


def _error_rule(geom, singular_point, degree):
    """Per-element rule: rotated collapsed rule for elements touching the singular point."""
    rule = quadrature.triangle_rule(degree)
    if singular_point is None:
        return [(np.arange(len(geom)), rule)]
    hit = np.isclose(geom.vertices, singular_point, atol=1e-14).all(axis=2)  # (T, 3)
    touching = hit.any(axis=1)
    groups = [(np.flatnonzero(~touching), rule)]
    for v in range(3):
        idx = np.flatnonzero(hit[:, v])
        if len(idx):
            groups.append((idx, quadrature.rotate(rule, v)))
    return groups


@dataclass
class ErrorReport:
    grad: float  # ||grad(u - u_h)||
    hess: float  # ||grad_h^2 (u - u_h)||
    pressure_l2: float
    pressure_grad: float
    ref_grad: float
    ref_hess: float
    ref_pressure_l2: float
    ref_pressure_grad: float
    iota: float

    @property
    def energy(self):
        """``(||grad e||^2 + iota^2 ||grad_h^2 e||^2)^(1/2)``, the form the reported tables follow."""
        return float(np.hypot(self.grad, self.iota * self.hess))

    @property
    def reference_energy(self):
        return float(np.hypot(self.ref_grad, self.iota * self.ref_hess))

    @property
    def relative(self):
        return self.energy / self.reference_energy

    @property
    def energy_sum(self):
        """``||grad e|| + iota ||grad_h^2 e||``; equivalent to ``energy`` within a factor sqrt(2)."""
        return self.grad + self.iota * self.hess

    @property
    def relative_sum(self):
        return self.energy_sum / (self.ref_grad + self.iota * self.ref_hess)

    @property
    def pressure(self):
        return float(np.hypot(self.pressure_l2, self.iota * self.pressure_grad))

    @property
    def relative_pressure(self):
        ref = float(np.hypot(self.ref_pressure_l2, self.iota * self.ref_pressure_grad))
        # divergence-free references have p = 0 up to rounding
        return self.pressure / ref if ref > 1e-10 * max(1.0, self.ref_grad) else float("nan")

    def as_dict(self):
        return {
            "grad": self.grad,
            "iota_hess": self.iota * self.hess,
            "energy": self.energy,
            "relative": self.relative,
            "relative_sum": self.relative_sum,
            "pressure": self.pressure,
            "relative_pressure": self.relative_pressure,
        }


def error_norms(mesh, layout, u, p, case, iota=None, degree=quadrature.ERROR_DEGREE):
    """Broken-norm errors of ``(u_h, p_h)`` against the reference fields of ``case``."""
    iota = case.iota if iota is None else iota
    geom_all = mesh_geometry(mesh)
    sing = np.zeros(2) if case.singular_origin else None
    coeffs = layout.local_coefficients(u)
    sums = np.zeros(8)
    for idx, rule in _error_rule(geom_all, sing, degree):
        if len(idx) == 0:
            continue
        tab = element.tabulate(rule.points)
        for start in range(0, len(idx), CHUNK):
            sel = idx[start : start + CHUNK]
            geom = ReferenceGeometry(geom_all.vertices[sel])
            basis = LocalBasis(geom, check=False)
            wq = 2.0 * rule.weights[None, :] * geom.area[:, None]
            x = geom.to_physical(rule.points)
            c = coeffs[sel]
            gh = np.einsum("tqsd,tsc->tqcd", basis.gradients(tab), c)
            hh = np.einsum("tqsde,tsc->tqcde", basis.hessians(tab), c)
            gu = case.grad(x)
            hu = case.hess(x)
            ph = np.einsum("qj,tj->tq", rule.points, p[mesh.triangles[sel]])
            gph = np.einsum("tj,tjd->td", p[mesh.triangles[sel]], geom.grad_lambda)
            pu = case.pressure(x)
            gpu = case.pressure_grad(x)
            sq = [
                ((gu - gh) ** 2).sum(axis=(2, 3)),
                ((hu - hh) ** 2).sum(axis=(2, 3, 4)),
                (pu - ph) ** 2,
                ((gpu - gph[:, None, :]) ** 2).sum(axis=2),
                (gu**2).sum(axis=(2, 3)),
                (hu**2).sum(axis=(2, 3, 4)),
                pu**2,
                (gpu**2).sum(axis=2),
            ]
            sums += [float((wq * s).sum()) for s in sq]
    r = np.sqrt(sums)
    return ErrorReport(*r, iota=iota)


# ----------------------------------------------------------------------------
# one complete solve


@dataclass
class CaseSolution:
    u: np.ndarray
    p: np.ndarray
    errors: ErrorReport
    residual: float
    symmetry: float
    n_unknowns: int
    h: float


def solve_case(mesh, case, parts=None, tol=RESIDUAL_TOL, corner_pressure="exact"):
    """Assemble, solve and measure one manufactured case on one mesh."""
    parts = assemble_parts(mesh) if parts is None else parts
    system = build_system(mesh, case, parts=parts, corner_pressure=corner_pressure)
    u, p, res = system.solve(tol=tol)
    errs = error_norms(mesh, parts.layout, u, p, case)
    return CaseSolution(
        u=u,
        p=p,
        errors=errs,
        residual=res.residual,
        symmetry=system.symmetry_error(),
        n_unknowns=system.n_velocity + system.n_pressure,
        h=mesh.h,
    )


# ----------------------------------------------------------------------------
# discrete inf-sup probe


def _mean_free_basis(mean, free):
    """Orthonormal basis of ``{q on free DoFs : mean . q = 0}``."""
    import scipy.linalg as sla

    m = mean[free][None, :]
    return sla.null_space(m)


def estimate_infsup(mesh, iota, parts=None, tol=1e-8, maxiter=500):
    """Discrete inf-sup constant of ``b_{iota,h}`` on ``V_h x P_h``.

    Uses the Hilbert forms ``||grad v||^2 + iota^2 ||grad_h^2 v||^2`` and
    ``||q||^2 + iota^2 ||grad q||^2`` and returns ``sqrt(theta_min)`` of
    ``B X^{-1} B^T q = theta M q`` on mean-free, corner-pinned pressures.
    The constant does not depend on ``mu``; the Hilbert forms are equivalent
    to the broken sum norms within a factor ``sqrt(2)``.
    """
    import scipy.linalg as sla
    import scipy.sparse.linalg as spla

    from .linalg import inverse_power_smallest

    if parts is None or parts.gram_grad is None:
        parts = assemble_parts(mesh, gram=True)
    layout = parts.layout
    fv, fp = layout.free_velocity, layout.free_pressure
    X = (parts.gram_grad + iota**2 * parts.gram_hess)[fv][:, fv]
    B = parts.coupling(iota)[fp][:, fv]
    M = parts.pressure(iota)[fp][:, fp].toarray()
    lu = spla.splu(sp.csc_matrix(X))
    XiBt = lu.solve(B.T.toarray())
    S = B @ XiBt
    S = 0.5 * (S + S.T)
    Z = _mean_free_basis(parts.mean, fp)
    Sz = Z.T @ S @ Z
    Mz = Z.T @ M @ Z
    chol = sla.cho_factor(Sz)
    res = inverse_power_smallest(
        lambda r: sla.cho_solve(chol, r), Mz, n=Sz.shape[0], block=4, tol=tol, maxiter=maxiter
    )
    beta = float(np.sqrt(max(res.value, 0.0)))
    return InfSupResult(beta=beta, h=mesh.h, iota=iota, iterations=res.iterations, converged=res.converged)


@dataclass
class InfSupResult:
    beta: float
    h: float
    iota: float
    iterations: int
    converged: bool

    @property
    def scaled(self):
        """``beta * log^{3/2}(1/h)``."""
        return self.beta * np.log(1.0 / self.h) ** 1.5
