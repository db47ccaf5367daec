"""Problem and scenario data model for two-stage stochastic quadratic programs.

A problem instance is

    min_x  1/2 x'Qx + c'x + E[h(x, omega)]      s.t.  Ax = b  (, x >= lb)

where the recourse value h(x, omega) is the optimum of the second-stage
program  min { g(y) : Dy = xi(omega) - C(omega) x, y >= 0 }  with g linear
(d'y) or convex quadratic (1/2 y'Py + d'y).  Randomness is confined to
entries of the right-hand side xi and of the technology matrix C, described
by independent marginals in ``stochastic_map``.

The module also builds the deterministic equivalent over a finite scenario
set (the brute-force ground-truth oracle used throughout the test suite)
and evaluates exact objectives over finite supports.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import qpsolve, simplex
from .base import as_matrix, as_vector
from .exceptions import DimensionMismatch, InfeasibleRegion
from .rng import substream


# ---------------------------------------------------------------------------
# distributions

@dataclass(frozen=True)
class Discrete:
    values: tuple
    probs: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        if len(values) != len(probs) or not values:
            raise ValueError("discrete marginal needs matching, non-empty values and probs")
        if min(probs) <= 0.0:
            raise ValueError("discrete probabilities must be positive")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"discrete probabilities sum to {sum(probs)!r}, not 1")

    def draw(self, rng):
        u = rng.random()
        acc = 0.0
        for v, p in zip(self.values, self.probs):
            acc += p
            if u <= acc:
                return v
        return self.values[-1]

    @property
    def mean(self):
        return sum(v * p for v, p in zip(self.values, self.probs))


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def draw(self, rng):
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def draw(self, rng):
        return float(self.mu + self.sigma * rng.standard_normal())


@dataclass(frozen=True)
class RandomEntry:
    """One random position: kind 'rhs' (xi[row]) or 'tech' (C[row, col])."""

    kind: str
    row: int
    col: int = -1
    dist: object = None

    def __post_init__(self):
        if self.kind not in ("rhs", "tech"):
            raise ValueError(f"unknown stochastic entry kind {self.kind!r}")


# ---------------------------------------------------------------------------
# problem / scenarios

class TwoStageProblem:
    """Validated container for one two-stage instance.

    ``recourse_lo``/``recourse_hi`` are optional declared bounds on
    h(x, omega) over the feasible region (instance metadata consumed by the
    sampling schedule); they are not enforced here.
    """

    def __init__(self, Q, c, A, b, D, d, xi, C, P=None, lower_bounds=None,
                 stochastic_map=(), name="", recourse_lo=None, recourse_hi=None):
        self.c = as_vector(c, name="c")
        self.n1 = self.c.size
        self.Q = as_matrix(Q, "Q", shape=(self.n1, self.n1))
        if np.abs(self.Q - self.Q.T).max(initial=0.0) > 1e-12 * (1.0 + np.abs(self.Q).max(initial=0.0)):
            raise ValueError("Q must be symmetric")
        self.A = as_matrix(A, "A")
        if self.A.shape[1] != self.n1:
            raise DimensionMismatch(f"A has {self.A.shape[1]} columns, expected {self.n1}")
        self.m1 = self.A.shape[0]
        self.b = as_vector(b, self.m1, "b")
        self.d = as_vector(d, name="d")
        self.n2 = self.d.size
        self.D = as_matrix(D, "D")
        if self.D.shape[1] != self.n2:
            raise DimensionMismatch(f"D has {self.D.shape[1]} columns, expected {self.n2}")
        self.m2 = self.D.shape[0]
        self.xi = as_vector(xi, self.m2, "xi")
        self.C = as_matrix(C, "C", shape=(self.m2, self.n1))
        if P is None:
            self.P = None
        else:
            self.P = as_matrix(P, "P", shape=(self.n2, self.n2))
            if np.abs(self.P - self.P.T).max(initial=0.0) > 1e-12 * (1.0 + np.abs(self.P).max(initial=0.0)):
                raise ValueError("P must be symmetric")
            try:
                np.linalg.cholesky(self.P)
            except np.linalg.LinAlgError as exc:
                raise ValueError("P must be positive definite") from exc
        if lower_bounds is None:
            self.lower_bounds = None
        else:
            lb = np.asarray(lower_bounds, dtype=float).reshape(-1)
            if lb.size != self.n1:
                raise DimensionMismatch(f"lower_bounds has length {lb.size}, expected {self.n1}")
            if np.any(np.isnan(lb)) or np.any(lb == np.inf):
                raise ValueError("lower_bounds entries must be finite or -inf")
            self.lower_bounds = lb
        self.stochastic_map = tuple(stochastic_map)
        for entry in self.stochastic_map:
            if entry.kind == "rhs":
                if not 0 <= entry.row < self.m2:
                    raise DimensionMismatch(f"rhs position {entry.row} out of range")
            else:
                if not (0 <= entry.row < self.m2 and 0 <= entry.col < self.n1):
                    raise DimensionMismatch(f"tech position ({entry.row},{entry.col}) out of range")
        self.name = name
        self.recourse_lo = None if recourse_lo is None else float(recourse_lo)
        self.recourse_hi = None if recourse_hi is None else float(recourse_hi)

    @property
    def quadratic_recourse(self):
        return self.P is not None

    def first_stage_cost(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.c @ x)

    def has_finite_support(self):
        return all(isinstance(e.dist, Discrete) for e in self.stochastic_map)

    def support_size(self):
        if not self.has_finite_support():
            return None
        size = 1
        for e in self.stochastic_map:
            size *= len(e.dist.values)
        return size


@dataclass(frozen=True)
class Scenario:
    xi: np.ndarray
    C: np.ndarray
    weight: float

    def __post_init__(self):
        if not self.weight > 0.0:
            raise ValueError("scenario weight must be positive")


class ScenarioSet:
    """Ordered collection of scenarios whose weights sum to one."""

    def __init__(self, scenarios):
        self.scenarios = tuple(scenarios)
        if not self.scenarios:
            raise ValueError("scenario set must be non-empty")
        total = sum(s.weight for s in self.scenarios)
        if abs(total - 1.0) > 1e-12 * len(self.scenarios):
            raise ValueError(f"scenario weights sum to {total!r}, not 1")
        self.weights = np.array([s.weight for s in self.scenarios])

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __getitem__(self, i):
        return self.scenarios[i]

    def union(self, other):
        """Pooled set with uniform weights (for cumulative i.i.d. sample growth)."""
        merged = list(self.scenarios) + list(other.scenarios)
        n = len(merged)
        return ScenarioSet(
            [Scenario(s.xi, s.C, 1.0 / n) for s in merged]
        )


def _realize(problem, draws):
    xi = problem.xi.copy()
    C = problem.C.copy()
    changed_c = False
    for entry, value in zip(problem.stochastic_map, draws):
        if entry.kind == "rhs":
            xi[entry.row] = value
        else:
            if not changed_c:
                changed_c = True
            C[entry.row, entry.col] = value
    return xi, C


def draw_scenarios(problem, rng, n):
    """n i.i.d. scenarios with equal weights 1/n, consuming ``rng``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    w = 1.0 / n
    out = []
    for _ in range(n):
        draws = [e.dist.draw(rng) for e in problem.stochastic_map]
        xi, C = _realize(problem, draws)
        out.append(Scenario(xi=xi, C=C, weight=w))
    return ScenarioSet(out)


def enumerate_support(problem, max_scenarios=1_000_000):
    """Exact finite support with product weights; requires discrete marginals only."""
    if not problem.has_finite_support():
        raise ValueError("support enumeration requires finite (discrete) marginals")
    size = problem.support_size()
    if size > max_scenarios:
        raise ValueError(f"support has {size} scenarios, above limit {max_scenarios}")
    if not problem.stochastic_map:
        return ScenarioSet([Scenario(problem.xi.copy(), problem.C.copy(), 1.0)])
    grids = [list(zip(e.dist.values, e.dist.probs)) for e in problem.stochastic_map]
    out = []
    for combo in itertools.product(*grids):
        weight = 1.0
        draws = []
        for value, prob in combo:
            weight *= prob
            draws.append(value)
        xi, C = _realize(problem, draws)
        out.append(Scenario(xi=xi, C=C, weight=weight))
    return ScenarioSet(out)


class ScenarioSampler:
    """Reproducible scenario stream: identical seeds give identical draws.

    ``sample`` advances an internal stream, so successive calls return
    independent batches; ``spawn`` derives a statistically independent
    sub-sampler for a structured key (used for growth/test/eval streams).
    """

    def __init__(self, problem, seed=0):
        self.problem = problem
        self.seed = int(seed)
        self.mode = "finite" if problem.has_finite_support() else "generator"
        self._rng = substream(self.seed, "sample")

    def sample(self, n):
        return draw_scenarios(self.problem, self._rng, n)

    def support(self, max_scenarios=1_000_000):
        return enumerate_support(self.problem, max_scenarios=max_scenarios)

    def spawn(self, *key):
        rng = substream(self.seed, *key)
        child = object.__new__(ScenarioSampler)
        child.problem = self.problem
        child.seed = self.seed
        child.mode = self.mode
        child._rng = rng
        return child


# ---------------------------------------------------------------------------
# deterministic equivalent

@dataclass
class ExtensiveSolution:
    status: str
    value: float
    x: np.ndarray | None
    y: list | None


class DeterministicProgram:
    """Block-structured deterministic equivalent over a finite scenario set.

    Variables are [x, y_1, ..., y_N]; the objective is
    1/2 x'Qx + c'x + sum_i w_i g(y_i) subject to Ax = b and
    C_i x + D y_i = xi_i, y_i >= 0 (plus x >= lb when bounds are present).
    """

    def __init__(self, problem, scenarios):
        n1, n2 = problem.n1, problem.n2
        m1, m2 = problem.m1, problem.m2
        N = len(scenarios)
        for s in scenarios:
            if s.xi.size != m2 or s.C.shape != (m2, n1):
                raise DimensionMismatch("scenario shapes do not match the problem")
        nv = n1 + N * n2
        A_eq = np.zeros((m1 + N * m2, nv))
        b_eq = np.zeros(m1 + N * m2)
        A_eq[:m1, :n1] = problem.A
        b_eq[:m1] = problem.b
        lin = np.zeros(nv)
        lin[:n1] = problem.c
        lb = np.full(nv, -np.inf)
        if problem.lower_bounds is not None:
            lb[:n1] = problem.lower_bounds
        lb[n1:] = 0.0
        for i, s in enumerate(scenarios):
            r0 = m1 + i * m2
            c0 = n1 + i * n2
            A_eq[r0:r0 + m2, :n1] = s.C
            A_eq[r0:r0 + m2, c0:c0 + n2] = problem.D
            b_eq[r0:r0 + m2] = s.xi
            lin[c0:c0 + n2] = s.weight * problem.d
        self.problem = problem
        self.scenarios = scenarios
        self.A_eq = A_eq
        self.b_eq = b_eq
        self.lin = lin
        self.lb = lb
        self.n1 = n1
        self.n2 = n2
        self.n_scenarios = N
        self.is_lp = (not problem.quadratic_recourse) and np.abs(problem.Q).max(initial=0.0) == 0.0

    def hessian(self):
        n1, n2 = self.n1, self.n2
        nv = self.lin.size
        H = np.zeros((nv, nv))
        H[:n1, :n1] = self.problem.Q
        if self.problem.quadratic_recourse:
            for i, s in enumerate(self.scenarios):
                c0 = n1 + i * n2
                H[c0:c0 + n2, c0:c0 + n2] = s.weight * self.problem.P
        return H

    def solve(self):
        if self.is_lp:
            status, value, v = _lp_with_bounds(self.lin, self.A_eq, self.b_eq, self.lb)
        else:
            res = qpsolve.solve_qp(self.hessian(), self.lin, self.A_eq, self.b_eq, lb=self.lb)
            status, value, v = res.status, res.obj, res.x
        if status != "optimal":
            return ExtensiveSolution(status=status, value=np.nan, x=None, y=None)
        x = v[:self.n1]
        ys = [v[self.n1 + i * self.n2: self.n1 + (i + 1) * self.n2] for i in range(self.n_scenarios)]
        return ExtensiveSolution(status="optimal", value=float(value), x=x, y=ys)


def _lp_with_bounds(c, A, b, lb):
    """min c'v s.t. Av = b, v >= lb with lb entries possibly -inf (free split)."""
    m, n = A.shape
    finite = np.isfinite(lb)
    cols, costs, col_map = [], [], []
    for i in range(n):
        cols.append(A[:, i])
        costs.append(c[i])
        col_map.append((i, 1.0))
        if not finite[i]:
            cols.append(-A[:, i])
            costs.append(-c[i])
            col_map.append((i, -1.0))
    shift = np.where(finite, lb, 0.0)
    res = simplex.solve_lp(np.array(costs), np.column_stack(cols), b - A @ shift)
    if res.status != simplex.OPTIMAL:
        return res.status, np.nan, None
    v = shift.copy()
    for z_val, (i, sign) in zip(res.x, col_map):
        v[i] += sign * z_val
    return "optimal", float(c @ v), v


def extensive_form(problem, scenarios):
    """Deterministic-equivalent program for the given finite scenario set."""
    return DeterministicProgram(problem, scenarios)


def true_objective(problem, scenarios, x):
    """c(x) + sum_i w_i h(x, omega_i) by one recourse solve per scenario."""
    from . import oracle

    x = as_vector(x, problem.n1, "x")
    total = problem.first_stage_cost(x)
    for i, s in enumerate(scenarios):
        sol = oracle.solve_recourse(problem, s, x)
        oracle.require_optimal(sol, i)
        total += s.weight * sol.h
    return float(total)


def initial_feasible_point(problem):
    """Feasible start: project the origin onto {Ax = b}, repair bounds if needed."""
    from . import linalg
    from .exceptions import SingularSystem

    try:
        x0 = linalg.project_affine(problem.A, problem.b, np.zeros(problem.n1))
    except SingularSystem:
        # Rank-deficient rows: fall back to the least-squares solution.
        x0, *_ = np.linalg.lstsq(problem.A, problem.b, rcond=None)
        resid = np.abs(problem.A @ x0 - problem.b).max(initial=0.0)
        if resid > 1e-8 * (1.0 + np.abs(problem.b).max(initial=0.0)):
            raise InfeasibleRegion("equality system Ax = b is inconsistent")
    lb = problem.lower_bounds
    if lb is not None and np.any(x0 < lb - 1e-12):
        x0 = linalg.project_polyhedral(problem.A, problem.b, lb, x0)
    return x0
