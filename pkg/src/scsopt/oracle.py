"""Second-stage solvers, subgradient extraction, and sample-average objectives.

For a first-stage point x and scenario (xi, C) the recourse program is

    h(x) = min { g(y) : Dy = xi - Cx, y >= 0 }

with g linear or convex quadratic.  The equality duals pi of that program
give the production subgradient of h with respect to x as  v = -C' pi,
for both the linear and the quadratic second stage.

The quadratic case also admits a closed-form dual in the multipliers s of
the bound constraints,

    h = max_{s >= 0}  -1/2 s'Hs + e's + const,
    M = D P^{-1/2},   H = P^{-1/2} (I - M'(MM')^{-1} M) P^{-1/2},
    e = Hd - P^{-1/2} M' (MM')^{-1} r,          r = xi - Cx,
    const = 1/2 r'(MM')^{-1} r + d'P^{-1/2}M'(MM')^{-1} r - 1/2 d'Hd,

kept here purely as a cross-check: H contains an orthogonal projector and is
singular in general, so the recipe "project the unconstrained stationary
point onto s >= 0" is only trusted when the projected point actually
satisfies the dual KKT conditions (see ``closed_form_multiplier``).
"""

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import qpsolve, simplex
from .base import as_vector
from .exceptions import NumericalBreakdown, RankDeficientD, RecourseInfeasible

_CACHE_LIMIT = 128


@dataclass
class RecourseSolution:
    h: float
    y: np.ndarray | None
    pi: np.ndarray | None
    status: str
    mu: np.ndarray | None = None
    basis: np.ndarray | None = None


def solve_lp_recourse(d, D, rhs, basis=None):
    """Optimal value, primal, and equality duals of min d'y s.t. Dy = rhs, y >= 0."""
    res = simplex.solve_lp(d, D, rhs, basis=basis)
    if res.status != simplex.OPTIMAL:
        return RecourseSolution(h=res.obj, y=None, pi=None, status=res.status)
    return RecourseSolution(h=res.obj, y=res.x, pi=res.pi, status="optimal", basis=res.basis)


def solve_qp_bound(P, d, D, rhs, lower=None, y0=None, phase1_basis=None):
    """Active-set solve of min 1/2 y'Py + d'y s.t. Dy = rhs, y >= lower (default 0)."""
    n2 = np.asarray(d).size
    lb = np.zeros(n2) if lower is None else np.asarray(lower, dtype=float)
    res = qpsolve.solve_qp(P, d, D, rhs, lb=lb, x0=y0, phase1_basis=phase1_basis)
    if res.status != qpsolve.OPTIMAL:
        return RecourseSolution(h=res.obj, y=None, pi=None, status=res.status)
    return RecourseSolution(h=res.obj, y=res.x, pi=res.pi, status="optimal",
                            mu=res.mu, basis=res.phase1_basis)


def solve_recourse(problem, scenario, x, basis=None):
    x = np.asarray(x, dtype=float)
    rhs = scenario.xi - scenario.C @ x
    if problem.quadratic_recourse:
        return solve_qp_bound(problem.P, problem.d, problem.D, rhs, phase1_basis=basis)
    return solve_lp_recourse(problem.d, problem.D, rhs, basis=basis)


def require_optimal(sol, scenario_index=None):
    if sol.status == "optimal":
        return sol
    if sol.status == "infeasible":
        raise RecourseInfeasible(
            f"second stage infeasible (scenario {scenario_index})", scenario_index
        )
    if sol.status == "unbounded":
        raise RecourseInfeasible(
            f"second stage unbounded below (scenario {scenario_index})", scenario_index
        )
    raise NumericalBreakdown(f"recourse solve ended with status {sol.status!r}")


def subgrad_ql(problem, x, scenario):
    """(h, v) for a linear second stage: v = -C' pi from the optimal LP duals."""
    if problem.quadratic_recourse:
        raise ValueError("subgrad_ql requires a linear second stage (P is None)")
    sol = require_optimal(solve_recourse(problem, scenario, x))
    return sol.h, -scenario.C.T @ sol.pi


def subgrad_qq(problem, x, scenario):
    """(h, v) for a quadratic second stage via the equality duals of the primal QP."""
    if not problem.quadratic_recourse:
        raise ValueError("subgrad_qq requires a quadratic second stage (P present)")
    sol = require_optimal(solve_recourse(problem, scenario, x))
    return sol.h, -scenario.C.T @ sol.pi


# ---------------------------------------------------------------------------
# closed-form dual of the quadratic second stage (cross-check only)

def _p_inv_sqrt(P):
    lam, V = np.linalg.eigh(P)
    if lam.min() <= 0.0:
        raise ValueError("P must be positive definite")
    return V @ np.diag(1.0 / np.sqrt(lam)) @ V.T


def closed_form_terms(problem, scenario, x):
    """(H, e, const) of the bound-multiplier dual at (x, scenario)."""
    if not problem.quadratic_recourse:
        raise ValueError("closed form applies to quadratic second stages only")
    D, d = problem.D, problem.d
    m2, n2 = D.shape
    Pis = _p_inv_sqrt(problem.P)
    M = D @ Pis
    MMt = M @ M.T
    if np.linalg.matrix_rank(MMt, tol=1e-10 * max(1.0, float(np.abs(MMt).max()))) < m2:
        raise RankDeficientD("D must have full row rank for the closed-form dual")
    MMt_inv = np.linalg.inv(MMt)
    H = Pis @ (np.eye(n2) - M.T @ MMt_inv @ M) @ Pis
    r = scenario.xi - scenario.C @ np.asarray(x, dtype=float)
    e = H @ d - Pis @ M.T @ MMt_inv @ r
    const = float(0.5 * r @ MMt_inv @ r + d @ Pis @ M.T @ MMt_inv @ r - 0.5 * d @ H @ d)
    return H, e, const


def closed_form_dual_value(problem, scenario, x, s):
    """Dual objective -1/2 s'Hs + e's + const at multiplier s.

    Strong duality makes this equal h(x, scenario) at the optimal bound
    multipliers of the primal solve, which is the always-available
    cross-check between the two paths.
    """
    H, e, const = closed_form_terms(problem, scenario, x)
    s = np.asarray(s, dtype=float)
    return float(-0.5 * s @ H @ s + e @ s + const)


def closed_form_multiplier(problem, scenario, x):
    """(s_star, well_posed): project the unconstrained stationary point onto s >= 0.

    s_star = max(H^+ e, 0).  ``well_posed`` is True exactly when s_star
    satisfies the KKT conditions of  max_{s>=0} -1/2 s'Hs + e's  (gradient
    nonpositive everywhere, zero on the support), i.e. when projecting the
    stationary point really does solve the constrained dual; only then is
    the closed-form value guaranteed to equal h.
    """
    H, e, _ = closed_form_terms(problem, scenario, x)
    s_bar = np.linalg.pinv(H, rcond=1e-12) @ e
    s_star = np.maximum(s_bar, 0.0)
    grad = e - H @ s_star
    scale = 1.0 + float(np.abs(e).max(initial=0.0))
    tol = 1e-8 * scale
    well_posed = bool(np.all(grad <= tol) and np.all(np.abs(grad[s_star > tol]) <= tol))
    return s_star, well_posed


# ---------------------------------------------------------------------------
# sample-average objective

class SaaFunction:
    """Sample-average objective F(x) = c(x) + sum_i w_i h(x, omega_i).

    Per-scenario recourse solutions are cached per evaluation point (bounded
    LRU), and LP solves are warm-started from each scenario's previous
    optimal basis.  Scenarios sharing a cached basis are screened in one
    matrix product: a basis's dual feasibility depends only on (d, D), so
    every scenario whose basic solution under that basis is nonnegative is
    optimal without touching the simplex.  Scenario order is fixed, so sums
    are bit-reproducible.
    """

    def __init__(self, problem, scenarios, basis_hint=None, screen_cache=None):
        self.problem = problem
        self.scenarios = list(scenarios)
        self.weights = np.array([s.weight for s in self.scenarios])
        self._cache = OrderedDict()
        self._bases = {}
        self._basis_hint = basis_hint
        # Dual-feasible bases of (d, D) discovered so far; shareable across
        # sample sets of the same problem (e.g. the growing set and the
        # replication test sets drawn each iteration).
        if screen_cache is None:
            screen_cache = {"order": [], "info": {}}
        self._screen = screen_cache
        self._rebuild_stacks()

    def _rebuild_stacks(self):
        self._xi_stack = np.array([s.xi for s in self.scenarios])
        self._c_stack = np.array([s.C for s in self.scenarios])
        self._shared_C = not any(e.kind == "tech" for e in self.problem.stochastic_map)

    def __len__(self):
        return len(self.scenarios)

    def extend(self, new_scenarios):
        """Append scenarios and reset weights to uniform (i.i.d. growth only)."""
        self.scenarios.extend(new_scenarios)
        n = len(self.scenarios)
        w = 1.0 / n
        self.scenarios = [
            type(s)(xi=s.xi, C=s.C, weight=w) for s in self.scenarios
        ]
        self.weights = np.full(n, w)
        self._rebuild_stacks()

    def _basis_screen(self, basis_key):
        """(B_inv, pi, d_B, dual_ok) for a candidate optimal basis of (d, D)."""
        info = self._screen["info"].get(basis_key)
        if info is not None:
            return info
        d, D = self.problem.d, self.problem.D
        basis = np.array(basis_key, dtype=int)
        try:
            B_inv = np.linalg.inv(D[:, basis])
        except np.linalg.LinAlgError:
            info = (None, None, None, False)
            self._screen["info"][basis_key] = info
            return info
        pi = d[basis] @ B_inv
        red = d - D.T @ pi
        red[basis] = 0.0
        tol_c = 1e-9 * (1.0 + float(np.abs(d).max(initial=0.0)))
        dual_ok = bool(np.all(np.isfinite(B_inv))) and red.min(initial=0.0) >= -tol_c
        info = (B_inv, pi, d[basis], dual_ok)
        self._screen["info"][basis_key] = info
        if dual_ok:
            self._screen["order"].append(basis_key)
        return info

    def _solutions(self, x):
        key = x.tobytes()
        entry = self._cache.get(key)
        if entry is None:
            entry = {}
            self._cache[key] = entry
        else:
            self._cache.move_to_end(key)
        n = len(self.scenarios)
        if len(entry) < n:
            missing = [i for i in range(n) if i not in entry]
            if not self.problem.quadratic_recourse and len(missing) >= 4:
                self._solve_batched(x, missing, entry)
                missing = [i for i in missing if i not in entry]
            for i in missing:
                s = self.scenarios[i]
                basis = self._bases.get(i, self._basis_hint)
                sol = solve_recourse(self.problem, s, x, basis=basis)
                require_optimal(sol, i)
                if sol.basis is not None:
                    self._bases[i] = sol.basis
                    self._basis_hint = sol.basis
                entry[i] = (sol.h, -s.C.T @ sol.pi)
        while len(self._cache) > _CACHE_LIMIT:
            self._cache.popitem(last=False)
        return entry

    def _solve_batched(self, x, missing, entry):
        """Assign (h, v) for every scenario optimal under a known basis.

        Each dual-feasible basis discovered so far is screened against all
        still-missing right-hand sides in one matrix product; the first basis
        (in discovery order) whose basic solution is nonnegative settles a
        scenario.  Only scenarios falling outside every known cell of the
        optimal-basis fan reach the scalar simplex.
        """
        rhs_all = self._xi_stack[missing] - self._c_stack[missing] @ x
        # Seed the shared pool with this set's cached bases.
        for i in missing:
            basis = self._bases.get(i, self._basis_hint)
            if basis is not None:
                self._basis_screen(tuple(basis.tolist()))
        open_pos = np.arange(len(missing))
        for basis_key in list(self._screen["order"]):
            if open_pos.size == 0:
                break
            B_inv, pi, d_B, _ok = self._screen["info"][basis_key]
            sub = rhs_all[open_pos]
            XB = sub @ B_inv.T
            tol_x = 1e-9 * (1.0 + np.abs(sub).max(axis=1))
            hit = XB.min(axis=1) >= -tol_x
            if not hit.any():
                continue
            h_vals = XB[hit] @ d_B
            shared_v = -self.scenarios[0].C.T @ pi if self._shared_C else None
            for local, pos in enumerate(open_pos[hit]):
                i = missing[pos]
                v = shared_v if shared_v is not None else -self.scenarios[i].C.T @ pi
                entry[i] = (float(h_vals[local]), v)
            open_pos = open_pos[~hit]

    def value(self, x):
        x = as_vector(x, self.problem.n1, "x")
        entry = self._solutions(x)
        h = np.array([entry[i][0] for i in range(len(self.scenarios))])
        return self.problem.first_stage_cost(x) + float(self.weights @ h)

    def subgrad(self, x):
        x = as_vector(x, self.problem.n1, "x")
        entry = self._solutions(x)
        g = self.problem.Q @ x + self.problem.c
        for i in range(len(self.scenarios)):
            g = g + self.weights[i] * entry[i][1]
        return g

    def value_and_subgrad(self, x):
        x = as_vector(x, self.problem.n1, "x")
        entry = self._solutions(x)
        n = len(self.scenarios)
        h = np.array([entry[i][0] for i in range(n)])
        g = self.problem.Q @ x + self.problem.c
        for i in range(n):
            g = g + self.weights[i] * entry[i][1]
        value = self.problem.first_stage_cost(x) + float(self.weights @ h)
        return value, g


def saa_value(F, x):
    return F.value(x)


def saa_subgrad(F, x):
    return F.subgrad(x)
