"""Sparse storage, the saddle-point solve and generalized eigen-iterations.

Sparse matrices are ``scipy.sparse.csr_matrix``.  Assembly triplets are
compressed in a fixed order so repeated runs are bit-identical.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class SingularMatrixError(RuntimeError):
    def __init__(self, message, null_vector=None):
        super().__init__(message)
        self.null_vector = null_vector


class ResidualError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


def to_csr(rows, cols, vals, shape):
    """Compress triplets; duplicates are summed in a deterministic order."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    order = np.lexsort((cols, rows))
    M = sp.coo_matrix((vals[order], (rows[order], cols[order])), shape=shape).tocsr()
    M.sum_duplicates()
    M.eliminate_zeros()
    M.sort_indices()
    return M


def symmetry_error(M):
    """Relative deviation ``max|M - M^T| / max|M|``."""
    M = sp.csr_matrix(M)
    scale = abs(M).max()
    if scale == 0:
        return 0.0
    return abs(M - M.T).max() / scale


@dataclass
class SolveResult:
    x: np.ndarray
    residual: float
    refinements: int
    multipliers: np.ndarray = None


def _factor(M):
    """LU of a symmetric matrix.

    Quasi-definite matrices (``[[A, B^T], [B, -C]]`` with ``A``, ``C`` positive
    definite) admit a symmetric factorization for any symmetric ordering, so
    a diagonal-pivot factorization with minimum-degree ordering on
    ``M + M^T`` is tried first; it keeps fill low.  Threshold pivoting with
    a column ordering is the fallback.
    """
    try:
        lu = spla.splu(
            M, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True}
        )
        probe = lu.solve(np.ones(M.shape[0]))
        if np.all(np.isfinite(probe)):
            return lu, "symmetric"
    except RuntimeError:
        pass
    return spla.splu(M, permc_spec="COLAMD"), "pivoting"


def solve_indefinite(M, b, tol=RESIDUAL_TOL, max_refine=6, check=True, border=None):
    """Direct sparse solve of a symmetric (possibly indefinite) system.

    ``border`` (``n x k``, optional) appends constraint columns: the solved
    system is ``[[M, E], [E^T, 0]] [x; l] = [b; 0]``, handled by bordering
    so that ``M`` itself is factorized.  Iterative refinement runs with
    residuals accumulated in extended precision until
    ``||r|| / ||b|| <= tol``; the reported residual refers to the full
    (bordered) system.
    """
    M = sp.csc_matrix(M)
    b = np.asarray(b, dtype=float)
    n = M.shape[0]
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    E = np.zeros((n, 0)) if border is None else np.asarray(border, dtype=float).reshape(n, -1)
    k = E.shape[1]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveResult(np.zeros(n), 0.0, 0, np.zeros(k))
    try:
        lu, mode = _factor(M)
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc), _near_null_vector(M)) from exc
    Z = lu.solve(E) if k else E
    schur = E.T @ Z
    if k and np.linalg.cond(schur) > 1e14:
        raise SingularMatrixError("constraint border is rank deficient")

    def apply_inverse(r, s):
        y = lu.solve(r)
        if not k:
            return y, np.zeros(0)
        ell = np.linalg.solve(schur, E.T @ y - s)
        return y - Z @ ell, ell

    x, ell = apply_inverse(b, np.zeros(k))
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("factorization produced non-finite values", _near_null_vector(M))
    Ml = M.astype(np.longdouble)
    El = E.astype(np.longdouble)
    xl, ll = x.astype(np.longdouble), ell.astype(np.longdouble)

    def residual():
        r = b - Ml @ xl - El @ ll
        s = -(El.T @ xl)
        rn = np.sqrt(float(np.sum(r.astype(float) ** 2) + np.sum(s.astype(float) ** 2)))
        return r.astype(float), s.astype(float), rn / bnorm

    r, s, res = residual()
    steps = 0
    while res > tol and steps < max_refine:
        dx, dl = apply_inverse(r, s)
        xl += dx
        ll += dl
        r, s, res = residual()
        steps += 1
    log.debug("solve n=%d mode=%s residual=%.2e refinements=%d", n, mode, res, steps)
    if check and res > tol:
        raise ResidualError(f"relative residual {res:.3e} exceeds {tol:.1e}")
    return SolveResult(xl.astype(float), res, steps, ll.astype(float))


def _near_null_vector(M, iters=20):
    """Inverse iteration on a slightly shifted matrix."""
    n = M.shape[0]
    shift = 1e-10 * max(abs(M).max(), 1.0)
    try:
        lu = spla.splu(sp.csc_matrix(M + shift * sp.identity(n)))
    except RuntimeError:
        return None
    v = np.random.default_rng(0).normal(size=n)
    for _ in range(iters):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    return v


def factorized(M):
    """Return ``solve(rhs)`` for a sparse symmetric matrix."""
    lu, _ = _factor(sp.csc_matrix(M))
    return lu.solve


def _as_apply(A):
    if callable(A):
        return A
    return lambda x: A @ x


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    converged: bool
    history: list


def _ritz(P, Q, which):
    """Small generalized eigenproblem ``P c = theta Q c``; sorted ascending."""
    P = 0.5 * (P + P.T)
    Q = 0.5 * (Q + Q.T)
    w, c = sla.eigh(P, Q)
    return (w, c) if which == "small" else (w[::-1], c[:, ::-1])


def inverse_power_smallest(solve_A, M, n=None, x0=None, block=1, tol=1e-6, maxiter=1000, seed=0, strict=False):
    """Smallest eigenvalue of ``A x = theta M x`` by (block) inverse iteration.

    ``solve_A(r)`` returns ``A^{-1} r`` on the constrained subspace, ``M`` is
    a matrix or a callable applying it.  Each sweep computes ``Y = A^{-1} M X``
    and performs a Rayleigh-Ritz step on ``span(Y)``; because ``A Y = M X``
    the projected stiffness is ``Y^T M X`` and ``A`` itself is never applied.
    """
    apply_M = _as_apply(M)
    X = _start_block(n, x0, block, seed)
    history = []
    for it in range(1, maxiter + 1):
        MX = np.column_stack([apply_M(X[:, k]) for k in range(X.shape[1])])
        Y = np.column_stack([solve_A(MX[:, k]) for k in range(X.shape[1])])
        MY = np.column_stack([apply_M(Y[:, k]) for k in range(Y.shape[1])])
        w, c = _ritz(Y.T @ MX, Y.T @ MY, "small")
        theta = w[0]
        history.append(theta)
        # A (Y c) = M X c, so the pencil residual needs no product with A
        Mx = MY @ c[:, 0]
        resid = np.linalg.norm(MX @ c[:, 0] - theta * Mx) / (abs(theta) * np.linalg.norm(Mx))
        X = Y @ c
        X /= np.sqrt(np.einsum("ik,ik->k", X, MY @ c))
        if resid <= tol:
            return EigenResult(float(theta), X[:, 0], it, True, history)
    if strict:
        raise ConvergenceError(f"inverse iteration did not converge in {maxiter} sweeps")
    return EigenResult(float(theta), X[:, 0], maxiter, False, history)


def power_largest(A, solve_M, n=None, x0=None, block=1, tol=1e-6, maxiter=1000, seed=0, strict=False):
    """Largest eigenvalue of ``A x = theta M x`` by (block) forward iteration.

    ``solve_M(r)`` returns ``M^{-1} r``.  Mirror image of
    :func:`inverse_power_smallest`: ``Y = M^{-1} A X`` so ``Y^T M Y = Y^T A X``.
    """
    apply_A = _as_apply(A)
    X = _start_block(n, x0, block, seed)
    history = []
    for it in range(1, maxiter + 1):
        AX = np.column_stack([apply_A(X[:, k]) for k in range(X.shape[1])])
        Y = np.column_stack([solve_M(AX[:, k]) for k in range(X.shape[1])])
        AY = np.column_stack([apply_A(Y[:, k]) for k in range(Y.shape[1])])
        w, c = _ritz(Y.T @ AY, Y.T @ AX, "large")
        theta = w[0]
        history.append(theta)
        # M (Y c) = A X c
        Ax = AY @ c[:, 0]
        resid = np.linalg.norm(Ax - theta * (AX @ c[:, 0])) / np.linalg.norm(Ax)
        X = Y @ c
        X /= np.sqrt(np.abs(np.einsum("ik,ik->k", X, AX @ c)))
        if resid <= tol:
            return EigenResult(float(theta), X[:, 0], it, True, history)
    if strict:
        raise ConvergenceError(f"power iteration did not converge in {maxiter} sweeps")
    return EigenResult(float(theta), X[:, 0], maxiter, False, history)


def _start_block(n, x0, block, seed):
    if x0 is not None:
        X = np.asarray(x0, dtype=float)
        return X[:, None] if X.ndim == 1 else X
    if n is None:
        raise ValueError("give either n or x0")
    return np.random.default_rng(seed).normal(size=(n, block))


def export_matrix_market(path, M, comment=""):
    scipy.io.mmwrite(str(path), sp.coo_matrix(M), comment=comment)


def read_matrix_market(path):
    return sp.csr_matrix(scipy.io.mmread(str(path)))
