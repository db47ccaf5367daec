"""Dense null-space bases and Euclidean projections onto affine and polyhedral sets.

Feasible directions for an equality-constrained problem {x : Ax = b} live in
null(A).  An orthonormal basis Z of that null space turns Z Z' into an exact
orthogonal projector, so projected vectors satisfy A (Z Z' v) = 0 to machine
precision and projection is idempotent; everything downstream leans on those
two identities.
"""

from dataclasses import dataclass

import numpy as np

from . import qpsolve
from .base import as_matrix, as_vector
from .exceptions import DimensionMismatch, EmptyNullSpace, InfeasibleRegion, SingularSystem


@dataclass(frozen=True)
class NullSpaceBasis:
    """Orthonormal columns of Z span null(A); rank_A counts singular values above tol."""

    Z: np.ndarray
    rank_A: int
    tol_rank: float

    @property
    def dim(self):
        return self.Z.shape[1]


def null_space_basis(A, tol_rank=1e-10):
    """Orthonormal basis of {d : A d = 0} via a rank-revealing SVD.

    Raises EmptyNullSpace when A has full column rank, in which case the
    feasible set {Ax = b} is a single point and the only feasible
    direction is zero.
    """
    A = as_matrix(A, "A")
    m, n = A.shape
    if m < 1 or n < 1:
        raise DimensionMismatch("A must have at least one row and one column")
    _, sig, Vt = np.linalg.svd(A)
    smax = float(sig[0]) if sig.size else 0.0
    if smax == 0.0:
        rank = 0
    else:
        rank = int(np.sum(sig > tol_rank * smax))
    if rank == n:
        raise EmptyNullSpace(f"A has full column rank {n}; null space is trivial")
    Z = Vt[rank:].T.copy()
    return NullSpaceBasis(Z=Z, rank_A=rank, tol_rank=float(tol_rank))


def _z_matrix(Z):
    if isinstance(Z, NullSpaceBasis):
        return Z.Z
    return np.asarray(Z, dtype=float)


def project_null(Z, v):
    """Z Z' v: the component of v lying in the feasible-direction subspace."""
    Zm = _z_matrix(Z)
    v = as_vector(v, name="v")
    if v.size != Zm.shape[0]:
        raise DimensionMismatch(f"v has length {v.size}, expected {Zm.shape[0]}")
    return Zm @ (Zm.T @ v)


def project_affine(A, b, x):
    """argmin_z ||z - x||  s.t.  Az = b, computed as x - A'(AA')^{-1}(Ax - b).

    A must have full row rank; a numerically singular AA' raises
    SingularSystem.
    """
    A = as_matrix(A, "A")
    b = as_vector(b, A.shape[0], "b")
    x = as_vector(x, A.shape[1], "x")
    G = A @ A.T
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularSystem(f"AA' condition number {cond:.3e}")
    try:
        w = np.linalg.solve(G, A @ x - b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return x - A.T @ w


def project_polyhedral(A, b, lower_bounds, x):
    """Euclidean projection of x onto {Az = b, z >= lower_bounds}.

    Reduces to project_affine when every bound is -inf; otherwise solved as
    the strictly convex QP min ||z - x||^2 by the active-set engine.
    """
    A = as_matrix(A, "A")
    b = as_vector(b, A.shape[0], "b")
    x = as_vector(x, A.shape[1], "x")
    n = x.size
    if lower_bounds is None:
        lb = np.full(n, -np.inf)
    else:
        lb = np.asarray(lower_bounds, dtype=float).reshape(-1)
        if lb.size != n:
            raise DimensionMismatch(f"lower_bounds has length {lb.size}, expected {n}")
    if not np.any(np.isfinite(lb)):
        return project_affine(A, b, x)
    res = qpsolve.solve_qp(np.eye(n), -x, A, b, lb=lb)
    if res.status != qpsolve.OPTIMAL:
        raise InfeasibleRegion("projection target region {Az=b, z>=lb} is empty")
    return res.x
