"""Primal active-set solver for  min 1/2 x'Hx + g'x  s.t.  Ax = b, x >= lb.

H must be symmetric positive semidefinite.  Lower bounds may be -inf
componentwise.  Equality duals ``pi`` and bound multipliers ``mu`` are
returned satisfying the stationarity convention

    H x + g - A' pi - mu = 0,     mu >= 0,   mu_i (x_i - lb_i) = 0.

Semidefinite reduced Hessians are handled explicitly: when the equality-
constrained subproblem is unbounded the solver walks the descent ray to the
nearest bound, so purely linear blocks (an LP embedded in a QP) are solved
correctly rather than rejected.  A feasible starting vertex comes from a
phase-1 simplex run on the shifted/split variables.
"""

from dataclasses import dataclass

import numpy as np

from . import simplex
from .exceptions import NumericalBreakdown

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class QpResult:
    status: str
    x: np.ndarray | None
    obj: float
    pi: np.ndarray | None
    mu: np.ndarray | None
    working_set: np.ndarray | None
    iterations: int
    phase1_basis: np.ndarray | None = None  # reusable warm start for feasibility LPs


def _null_basis(M, tol=1e-11):
    """Orthonormal basis of null(M) for a possibly empty or rank-deficient M."""
    m, n = M.shape
    if m == 0:
        return np.eye(n)
    _, sig, Vt = np.linalg.svd(M)
    smax = sig[0] if sig.size else 0.0
    rank = int(np.sum(sig > tol * max(smax, 1.0)))
    return Vt[rank:].T.copy()


def feasible_point(A, b, lb, tol=1e-9, basis=None):
    """A vertex of {Ax = b, x >= lb} via phase-1 simplex, or (None, None) if empty.

    Finite-lower-bound variables are shifted to zero; free variables are
    split into positive and negative parts.  Returns (x, basis) where the
    basis warm-starts the next feasibility solve for the same A and lb
    (any feasible basis is optimal for the zero objective, so a cached
    basis usually costs zero pivots).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    b = np.asarray(b, dtype=float).reshape(-1)
    lb = np.asarray(lb, dtype=float).reshape(-1)
    m, n = A.shape
    finite = np.isfinite(lb)
    cols = []
    col_map = []  # (variable index, sign)
    for i in range(n):
        cols.append(A[:, i])
        col_map.append((i, 1.0))
        if not finite[i]:
            cols.append(-A[:, i])
            col_map.append((i, -1.0))
    Az = np.column_stack(cols) if cols else np.zeros((m, 0))
    shift = np.where(finite, lb, 0.0)
    bz = b - A @ shift
    res = simplex.solve_lp(np.zeros(Az.shape[1]), Az, bz, tol=tol, basis=basis)
    if res.status != simplex.OPTIMAL:
        return None, None
    x = shift.copy()
    for z_val, (i, sign) in zip(res.x, col_map):
        x[i] += sign * z_val
    return x, res.basis


def solve_qp(H, g, A, b, lb=None, x0=None, tol=1e-9, max_iter=None, phase1_basis=None):
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float).reshape(-1)
    n = g.size
    if A is None or np.size(A) == 0:
        A = np.zeros((0, n))
        b = np.zeros(0)
    else:
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(1, -1)
        b = np.asarray(b, dtype=float).reshape(-1)
    m = A.shape[0]
    if lb is None:
        lb = np.full(n, -np.inf)
    else:
        lb = np.asarray(lb, dtype=float).reshape(-1)
    if max_iter is None:
        max_iter = 100 * (n + m + 10)

    scale = 1.0 + float(np.abs(b).max(initial=0.0)) + float(np.abs(lb[np.isfinite(lb)]).max(initial=0.0))
    feas_tol = 1e-8 * scale

    x = None
    out_basis = None
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if (
            x0.size == n
            and float(np.abs(A @ x0 - b).max(initial=0.0)) <= feas_tol
            and np.all(x0 >= lb - feas_tol)
        ):
            x = np.maximum(x0, lb)
    if x is None:
        x, out_basis = feasible_point(A, b, lb, tol=tol, basis=phase1_basis)
        if x is None:
            return QpResult(INFEASIBLE, None, np.inf, None, None, None, 0)

    bounded = np.isfinite(lb)
    act_tol = 1e-9 * scale
    working = bounded & (x - lb <= act_tol)
    x = np.where(working, lb, x)

    for it in range(max_iter):
        free = ~working
        idx_f = np.flatnonzero(free)
        grad = H @ x + g
        A_f = A[:, idx_f]
        N = _null_basis(A_f)
        p = np.zeros(n)
        ray = False
        if N.shape[1] > 0:
            Hr = N.T @ H[np.ix_(idx_f, idx_f)] @ N
            gr = N.T @ grad[idx_f]
            Hr = 0.5 * (Hr + Hr.T)
            lam, V = np.linalg.eigh(Hr)
            lam_max = lam.max(initial=0.0)
            sing_tol = 1e-10 * max(lam_max, 1.0)
            pos = lam > sing_tol
            g_null = V[:, ~pos].T @ gr
            g_scale = 1.0 + float(np.abs(gr).max(initial=0.0))
            if np.abs(g_null).max(initial=0.0) > 1e-9 * g_scale:
                # Subproblem unbounded: descend along the null component.
                q = -V[:, ~pos] @ g_null
                q /= np.linalg.norm(q)
                ray = True
            else:
                q = -V[:, pos] @ ((V[:, pos].T @ gr) / lam[pos]) if pos.any() else np.zeros(gr.size)
            p[idx_f] = N @ q

        step_scale = 1.0 + float(np.abs(x).max(initial=0.0))
        if not ray and np.abs(p).max(initial=0.0) <= 1e-11 * step_scale:
            # Stationary on the working set: check multipliers.
            pi, mu = _multipliers(H, g, A, x, idx_f, working)
            mu_min = mu[working].min(initial=0.0) if working.any() else 0.0
            if mu_min >= -1e-8 * (1.0 + float(np.abs(grad).max(initial=0.0))):
                return _finish(H, g, A, b, lb, x, working, it, out_basis)
            drop = np.flatnonzero(working)[int(np.argmin(mu[working]))]
            working[drop] = False
            continue

        # Ratio test against inactive finite bounds.
        blocking = -1
        alpha_max = np.inf
        dec = free & bounded & (p < -1e-13 * (1.0 + np.abs(p).max(initial=0.0)))
        for i in np.flatnonzero(dec):
            a_i = (x[i] - lb[i]) / (-p[i])
            if a_i < alpha_max - 1e-14:
                alpha_max = a_i
                blocking = i
        if ray:
            if not np.isfinite(alpha_max):
                return QpResult(UNBOUNDED, None, -np.inf, None, None, None, it, out_basis)
            alpha = alpha_max
        else:
            alpha = min(1.0, alpha_max)
        x = x + alpha * p
        if blocking >= 0 and alpha >= alpha_max - 1e-14:
            working[blocking] = True
            x[blocking] = lb[blocking]
    raise NumericalBreakdown("active-set QP iteration limit reached")


def _multipliers(H, g, A, x, idx_f, working):
    grad = H @ x + g
    if A.shape[0] > 0:
        pi, *_ = np.linalg.lstsq(A[:, idx_f].T, grad[idx_f], rcond=None)
    else:
        pi = np.zeros(0)
    mu = grad - (A.T @ pi if A.shape[0] > 0 else 0.0)
    mu = np.where(working, mu, 0.0)
    return pi, mu


def _finish(H, g, A, b, lb, x, working, iters, phase1_basis=None):
    """Re-solve the KKT system on the final working set for tight residuals."""
    n = x.size
    m = A.shape[0]
    idx_f = np.flatnonzero(~working)
    idx_w = np.flatnonzero(working)
    x_out = x.copy()
    x_out[idx_w] = lb[idx_w]
    nf = idx_f.size
    K = np.zeros((nf + m, nf + m))
    K[:nf, :nf] = H[np.ix_(idx_f, idx_f)]
    if m > 0:
        K[:nf, nf:] = -A[:, idx_f].T
        K[nf:, :nf] = A[:, idx_f]
    rhs = np.concatenate([
        -(g[idx_f] + H[np.ix_(idx_f, idx_w)] @ x_out[idx_w]),
        b - (A[:, idx_w] @ x_out[idx_w] if m > 0 else np.zeros(0)),
    ])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    x_try = x_out.copy()
    x_try[idx_f] = sol[:nf]
    pi = sol[nf:]
    grad = H @ x_try + g
    mu = grad - (A.T @ pi if m > 0 else 0.0)
    mu = np.where(working, mu, 0.0)
    scale = 1.0 + float(np.abs(grad).max(initial=0.0))
    stat = grad - (A.T @ pi if m > 0 else 0.0) - mu
    ok = (
        float(np.abs(stat).max(initial=0.0)) <= 1e-9 * scale
        and np.all(x_try[idx_f] >= lb[idx_f] - 1e-9 * (1.0 + np.abs(x_try).max(initial=0.0)))
        and (m == 0 or float(np.abs(A @ x_try - b).max(initial=0.0)) <= 1e-8 * (1.0 + np.abs(b).max(initial=0.0)))
        and mu.min(initial=0.0) >= -1e-8 * scale
    )
    if not ok:
        # Keep the iterate the loop certified instead of a failed polish.
        x_try = x_out
        pi, mu = _multipliers(H, g, A, x_try, idx_f, working)
    mu = np.maximum(mu, 0.0)
    obj = float(0.5 * x_try @ H @ x_try + g @ x_try)
    return QpResult(OPTIMAL, x_try, obj, pi, mu, working.copy(), iters, phase1_basis)
