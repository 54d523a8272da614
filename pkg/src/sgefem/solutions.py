"""Closed-form manufactured solutions for the strain gradient problem.

Four cases on the unit square, all with Young's modulus ``E = 1``:

1. divergence-free smooth field, homogeneous boundary conditions;
2. nearly incompressible smooth field with ``p = lambda div u``;
3. corner singularity ``rho^{3/2}`` at the origin with inhomogeneous data;
4. solution ``u0`` of the limiting (``iota -> 0``) elasticity problem, used as
   the reference for the perturbed discrete solution.

Derivatives up to fourth order come from symbolic differentiation of the
closed forms (sympy), compiled to numpy callables.  Every evaluator takes
points with trailing dimension 2 and broadcasts over the leading ones.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sym

X, Y = sym.symbols("x y", real=True)
COORDS = (X, Y)
# Lame constants stay symbolic so each case is differentiated once
LAM, MU = sym.symbols("lam mu", positive=True)
_COMPILED = {}


def lame(nu, E=1.0):
    """Lame constants ``(lambda, mu)`` from Young's modulus and Poisson's ratio."""
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def _compile(exprs, shape):
    flat = [sym.sympify(e) for e in np.asarray(exprs, dtype=object).ravel()]
    fn = sym.lambdify(COORDS + (LAM, MU), flat, modules="numpy", cse=True)

    def evaluate(x, lam, mu):
        x = np.asarray(x, dtype=float)
        out = fn(x[..., 0], x[..., 1], lam, mu)
        out = [np.broadcast_to(o, x.shape[:-1]) for o in out]
        return np.stack(out, axis=-1).reshape(x.shape[:-1] + shape)

    return evaluate


def _grad(f):
    return [sym.diff(f, v) for v in COORDS]


def _lap(f):
    return sym.diff(f, X, 2) + sym.diff(f, Y, 2)


def _elasticity_operator(u, lam, mu):
    """mu Lap u + (lam + mu) grad div u, componentwise."""
    div = sym.diff(u[0], X) + sym.diff(u[1], Y)
    gdiv = _grad(div)
    return [mu * _lap(u[i]) + (lam + mu) * gdiv[i] for i in range(2)]


@dataclass
class ManufacturedCase:
    """Exact fields of one manufactured case.

    ``value``/``grad``/``hess`` describe the reference displacement (``u`` for
    cases 1-3, ``u0`` for case 4).  The load is ``f = iota^2 * load_high + load_low``.
    """

    case_id: int
    nu: float
    iota: float
    lam: float
    mu: float
    homogeneous: bool
    zero_mean_pressure: bool
    singular_origin: bool
    exprs: dict = field(repr=False)

    def _fn(self, name, shape):
        key = (self.case_id, name)
        if key not in _COMPILED:
            _COMPILED[key] = _compile(self.exprs[name], shape)
        fn = _COMPILED[key]
        return lambda x: fn(x, self.lam, self.mu)

    def _at_origin_limit(self, fn, x):
        """Evaluate ``fn``, replacing values at the singular corner by their limit 0."""
        x = np.asarray(x, dtype=float)
        if not self.singular_origin:
            return fn(x)
        at_origin = np.linalg.norm(x, axis=-1) < 1e-14
        with np.errstate(divide="ignore", invalid="ignore"):
            out = fn(x)
        if np.any(at_origin):
            out = np.where(at_origin.reshape(at_origin.shape + (1,) * (out.ndim - at_origin.ndim)), 0.0, out)
        return out

    def value(self, x):
        return self._at_origin_limit(self._fn("u", (2,)), x)

    def grad(self, x):
        """``grad[..., i, j] = d u_i / d x_j``."""
        return self._fn("grad", (2, 2))(x)

    def hess(self, x):
        """``hess[..., i, j, k] = d^2 u_i / d x_j d x_k``."""
        return self._fn("hess", (2, 2, 2))(x)

    def pressure(self, x):
        # p ~ rho^{1/2} near the singular corner, so the limit there is 0
        return self._at_origin_limit(self._fn("p", ()), x)

    def pressure_grad(self, x):
        return self._fn("grad_p", (2,))(x)

    def divergence(self, x):
        g = self.grad(x)
        return g[..., 0, 0] + g[..., 1, 1]

    def load_low(self, x):
        """The ``-L u`` part of the load, ``L u = mu Lap u + (lam + mu) grad div u``."""
        return self._fn("f_low", (2,))(x)

    def load_high(self, x):
        """``Lap L u``; enters the load multiplied by ``iota^2``."""
        return self._fn("f_high", (2,))(x)

    def eval_f(self, x, iota=None):
        iota = self.iota if iota is None else iota
        x = np.asarray(x, dtype=float)
        if self.singular_origin and np.any(np.linalg.norm(x, axis=-1) < 1e-12):
            raise ValueError("load is undefined at the singular corner")
        out = self.load_low(x)
        if self.exprs["f_high"] is not None:
            out = out + iota**2 * self.load_high(x)
        return out

    def boundary_traction(self, x, normal):
        """Double traction ``(d_n C eps(u)) n`` at boundary points with unit ``normal``."""
        x = np.asarray(x, dtype=float)
        if self.singular_origin and np.any(np.linalg.norm(x, axis=-1) < 1e-12):
            raise ValueError("double traction is undefined at the singular corner")
        dsig = self._fn("dsigma", (2, 2, 2))(x)  # [k, i, j] = d_k sigma_ij
        n = np.broadcast_to(normal, x.shape)
        return np.einsum("...k,...kij,...j->...i", n, dsig, n)

    @property
    def has_boundary_traction(self):
        return not self.homogeneous

    @property
    def load_vanishes(self):
        return self.exprs.get("load_zero", False)


def _case_fields(case_id, lam, mu):
    s = sym.sin
    pi = sym.pi
    if case_id == 1:
        u = [
            -s(pi * X) ** 4 * s(pi * Y) ** 2 * s(2 * pi * Y),
            s(pi * X) ** 2 * s(2 * pi * X) * s(pi * Y) ** 4,
        ]
    elif case_id == 2:
        u = [
            -2 * s(pi * X) ** 2 * s(pi * Y) ** 2 * s(2 * pi * Y),
            (2 * mu + lam) / lam * s(2 * pi * X) * s(pi * Y) ** 4,
        ]
    elif case_id == 3:
        alpha = sym.Rational(3, 2)
        omega = 3 * pi / 4
        rho = sym.sqrt(X**2 + Y**2)
        th = sym.atan2(Y, X)
        C1 = -sym.cos((alpha + 1) * omega) / sym.cos((alpha - 1) * omega)
        C2 = 2 * (lam + 2 * mu) / (lam + mu)
        u_r = rho**alpha / (2 * mu) * (
            -(alpha + 1) * sym.cos((alpha + 1) * th) + (C2 - (alpha + 1)) * C1 * sym.cos((alpha - 1) * th)
        )
        u_t = rho**alpha / (2 * mu) * (
            (alpha + 1) * sym.sin((alpha + 1) * th) + (C2 + alpha - 1) * C1 * sym.sin((alpha - 1) * th)
        )
        u = [u_r * sym.cos(th) - u_t * sym.sin(th), u_r * sym.sin(th) + u_t * sym.cos(th)]
    elif case_id == 4:
        u = [
            -s(pi * X) ** 2 * s(2 * pi * Y),
            s(2 * pi * X) * s(pi * Y) ** 2,
        ]
    else:
        raise ValueError(f"unknown case id {case_id!r}; expected 1, 2, 3 or 4")
    return u


@lru_cache(maxsize=None)
def _build_exprs(case_id):
    lam, mu = LAM, MU
    u = _case_fields(case_id, lam, mu)
    grad = [[sym.diff(u[i], v) for v in COORDS] for i in range(2)]
    hess = [[[sym.diff(grad[i][j], v) for v in COORDS] for j in range(2)] for i in range(2)]
    div = grad[0][0] + grad[1][1]
    p = lam * div
    Lu = _elasticity_operator(u, lam, mu)
    exprs = {
        "u": u,
        "grad": grad,
        "hess": hess,
        "p": p,
        "grad_p": _grad(p),
        "f_low": [-e for e in Lu],
        # case 4 solves the unperturbed problem: no iota^2 term in its load
        "f_high": None if case_id == 4 else [_lap(e) for e in Lu],
        "load_zero": case_id == 3,
    }
    # d_k sigma_ij with sigma = 2 mu eps(u) + lam div(u) I
    dsig = []
    for k, vk in enumerate(COORDS):
        rows = []
        for i in range(2):
            row = []
            for j in range(2):
                eps = (hess[i][j][k] + hess[j][i][k]) / 2
                row.append(2 * mu * eps + (lam * sym.diff(div, vk) if i == j else 0))
            rows.append(row)
        dsig.append(rows)
    exprs["dsigma"] = dsig
    return exprs


def make_case(case_id, nu, iota, E=1.0):
    if case_id not in (1, 2, 3, 4):
        raise ValueError(f"unknown case id {case_id!r}; expected 1, 2, 3 or 4")
    if not 0.0 < nu < 0.5:
        raise ValueError("Poisson ratio must lie in (0, 0.5)")
    lam, mu = lame(nu, E)
    exprs = _build_exprs(case_id)
    return ManufacturedCase(
        case_id=case_id,
        nu=nu,
        iota=iota,
        lam=lam,
        mu=mu,
        homogeneous=case_id != 3,
        zero_mean_pressure=case_id != 3,
        singular_origin=case_id == 3,
        exprs=exprs,
    )
