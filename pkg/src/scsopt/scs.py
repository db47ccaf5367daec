"""Stochastic conjugate subgradient solver for two-stage stochastic programs.

One iteration, starting from incumbent x with radius delta over the current
sample average F:

1. take a subgradient g of F — at the previous line search's exit point
   (which is the incumbent itself after an accepted step), so failed
   searches still feed far-side slope information back into the direction —
   and project it onto the null space of the active constraints (the
   equality rows plus any lower bounds the incumbent sits on), keeping
   search directions feasible;
2. combine it with the previous direction: the new direction is the
   negative minimum-norm convex combination of the projected subgradient
   and the previous projected direction (a nonsmooth conjugate step; weight
   0 degenerates to the projected subgradient method);
3. if the direction norm is at or below ``eps``, probe the active bounds
   for a release whose enlarged-face descent is certified by function
   evaluations; release and retry, or stop when none descends;
4. line-search along the direction for a step that both decreases F enough
   (set L) and sufficiently flattens the directional derivative (set R),
   capped so trial points stay inside the radius-delta ball and above the
   variable lower bounds; when an inactive bound blocks the search before
   the derivative can flatten, the step to that boundary is taken on
   sufficient decrease alone and the bound joins the active set;
5. grow the sample so its size matches the Hoeffding schedule at the
   current radius, then re-test the candidate's decrease on an independent
   same-size replication sample; accept (grow delta) or reject (shrink
   delta, keep the incumbent).

Sample sizes follow  ceil(-8 ln(eps_h/2) (M-m)^2 / (kappa^2 delta^4)),
which makes the sample average uniformly accurate to ~kappa delta^2 inside
the radius-delta ball with probability 1 - eps_h when h(x, omega) is
bounded in [m, M].
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg, model, oracle
from .base import ParamsMixin
from .exceptions import (
    EmptyNullSpace,
    InfeasibleRegion,
    NonPositiveDelta,
    NumericalBreakdown,
    ZeroCap,
)
from .records import IterateRecord
from .rng import substream


# ---------------------------------------------------------------------------
# schedule / direction primitives

def hoeffding_bound(eps_h, spread, kappa, delta):
    """Real-valued sample-size requirement -8 ln(eps_h/2) spread^2 / (kappa^2 delta^4)."""
    if delta <= 0.0:
        raise NonPositiveDelta(f"delta must be positive, got {delta}")
    if not 0.0 < eps_h < 1.0:
        raise ValueError("eps_h must lie in (0, 1)")
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    if spread < 0.0:
        raise ValueError("M - m must be nonnegative")
    return -8.0 * math.log(eps_h / 2.0) * spread**2 / (kappa**2 * delta**4)


def sample_size(eps_h, M_minus_m, kappa, delta, max_sample=None):
    """Integer sample size: the Hoeffding bound, ceiled and clamped to [1, max_sample]."""
    n = math.ceil(hoeffding_bound(eps_h, M_minus_m, kappa, delta))
    n = max(n, 1)
    if max_sample is not None:
        n = min(n, int(max_sample))
    return n


def lambda_star(g_tilde, d_prev_tilde):
    """Minimizer over [0,1] of ||lam (-d_prev) + (1-lam) g||^2.

    A zero previous direction (the first iteration) pins lam to 0 so the
    step degenerates to the projected subgradient; likewise when the
    objective is constant in lam.
    """
    g = np.asarray(g_tilde, dtype=float)
    d = np.asarray(d_prev_tilde, dtype=float)
    if float(np.linalg.norm(d)) <= 1e-14:
        return 0.0
    w = g + d
    if float(np.linalg.norm(w)) <= 1e-14:
        return 0.0
    lam = float(g @ w) / float(w @ w)
    return min(1.0, max(0.0, lam))


def conjugate_direction(g_tilde, d_prev_tilde):
    """New search direction: minus the minimum-norm convex combination."""
    g = np.asarray(g_tilde, dtype=float)
    d = np.asarray(d_prev_tilde, dtype=float)
    lam = lambda_star(g, d)
    return -(lam * (-d) + (1.0 - lam) * g)


def step_cap(x, d_tilde, delta, lower_bounds):
    """Largest step keeping x + t d inside the radius-delta ball and above bounds.

    Raises ZeroCap when x sits on a bound that d points out of, i.e. no
    strictly positive step is feasible.
    """
    d = np.asarray(d_tilde, dtype=float)
    dn = float(np.linalg.norm(d))
    if dn <= 0.0:
        raise ValueError("direction must be nonzero")
    t_max = delta / dn
    if lower_bounds is not None:
        x = np.asarray(x, dtype=float)
        lb = np.asarray(lower_bounds, dtype=float)
        dec = (d < -1e-13 * (1.0 + np.abs(d).max())) & np.isfinite(lb)
        for i in np.flatnonzero(dec):
            t_max = min(t_max, (x[i] - lb[i]) / (-d[i]))
    if t_max <= 1e-14 * max(1.0, delta / dn):
        raise ZeroCap("incumbent sits on a bound the direction points out of")
    return t_max


@dataclass
class LineSearchResult:
    success: bool
    t: float = 0.0
    x_new: np.ndarray | None = None
    g_new: np.ndarray | None = None
    reason: str = ""
    n_evals: int = 0
    f_before: float = np.nan
    f_after: float = np.nan
    trial_points: list = field(default_factory=list)
    x_last: np.ndarray | None = None  # final trial point, kept on failure too
    boundary: bool = False  # step taken to a blocking bound on decrease alone
    x_cut: np.ndarray | None = None  # trial with the largest directional derivative


def line_search(F, Z, x, d_tilde, m1, m2, t_max, max_bisections=60,
                accept_boundary=False, boundary_floor=0.0):
    """Bracketing bisection for a step in L and R along d_tilde.

    L:  F(x + t d) - F(x) <= -m2 t ||d||^2   (enough decrease)
    R:  0 > <Z Z' g(t), d> >= -m1 ||d||^2    (flattened but still descending)

    Starts at t_max and maintains [t_lo, t_hi]: a point outside L (or past
    the minimum along the ray) shrinks t_hi, a point inside L whose
    directional derivative is still too steep raises t_lo.  Failure reasons:
    ``no_descent`` when no trial improved on F(x) at all, ``max_bisections``
    otherwise; both are routed to the caller's rejection branch.

    With ``accept_boundary``, a first trial that achieves sufficient
    decrease at the cap while the derivative is still steeper than R allows
    is returned as a boundary step: the flattening condition is unreachable
    inside the capped segment, and sufficient decrease is what the theory
    guarantees for steps that run into a constraint or the sampling-radius
    boundary.  The caller grows the radius after accepted steps, so a
    radius-capped boundary step self-corrects the cap.  ``boundary_floor``
    suppresses boundary steps whose move t_max ||d|| is microscopic: those
    make no real progress and would only disturb the search state.
    """
    d = np.asarray(d_tilde, dtype=float)
    dsq = float(d @ d)
    if dsq <= 0.0 or t_max <= 0.0:
        raise ValueError("line search needs a nonzero direction and positive t_max")
    f0 = F.value(x)
    t_lo, t_hi = 0.0, float(t_max)
    t = float(t_max)
    any_descent = False
    trials = []
    xt = None
    x_cut, gd_cut = None, -np.inf
    for evals in range(1, max_bisections + 1):
        xt = x + t * d
        ft, gt = F.value_and_subgrad(xt)
        trials.append(xt)
        if ft < f0:
            any_descent = True
        in_L = (ft - f0) <= -m2 * t * dsq
        gd = float(linalg.project_null(Z, gt) @ d) if Z is not None else float(gt @ d)
        if gd > gd_cut:
            gd_cut, x_cut = gd, xt
        if in_L and (0.0 > gd >= -m1 * dsq):
            return LineSearchResult(True, t, xt, gt, "ok", evals, f0, ft, trials, xt)
        if (accept_boundary and evals == 1 and in_L and gd < -m1 * dsq
                and t * math.sqrt(dsq) > boundary_floor):
            return LineSearchResult(True, t, xt, gt, "boundary", evals, f0, ft,
                                    trials, xt, boundary=True)
        if (not in_L) or gd >= 0.0:
            t_hi = t
        else:
            t_lo = t
        # A relatively collapsed bracket cannot separate L from R anymore
        # (the window is squeezed onto a kink); stop burning evaluations.
        if t_hi - t_lo <= 1e-7 * t_max:
            break
        t = 0.5 * (t_lo + t_hi)
    reason = "max_bisections" if any_descent else "no_descent"
    # On failure the most useful subgradient for the next convex combination
    # is the one that cuts the current direction hardest (largest <g(t), d>).
    return LineSearchResult(False, 0.0, None, None, reason, len(trials), f0, np.nan,
                            trials, xt, x_cut=x_cut)


def acceptance_test(F_S, F_T, x_cand, x_hat_prev, d_norm, eta1, eta2, delta):
    """Replication test gating incumbent moves.

    The in-sample decrease must be matched, up to the factor eta1, by the
    decrease measured on the independent same-size sample:

        eta1 * (F_T(x_cand) - F_T(x_hat)) <= F_S(x_cand) - F_S(x_hat)

    and the direction norm must clear eta2 * delta.  Over a full finite
    support (F_S is F_T) the test reduces to monotone decrease plus the
    norm condition.
    """
    lhs = eta1 * (F_T.value(x_cand) - F_T.value(x_hat_prev))
    rhs = F_S.value(x_cand) - F_S.value(x_hat_prev)
    return bool(lhs <= rhs) and bool(d_norm > eta2 * delta)


# ---------------------------------------------------------------------------
# solver

@dataclass
class IterationDiagnostics:
    k: int
    lam: float
    g_norm: float
    g_post_norm: float
    dot_dg: float
    d_norm: float
    t_max: float
    ls_reason: str
    ls_evals: int
    f_before: float
    f_after: float
    accepted: bool


class ScsSolver(ParamsMixin):
    """Adaptive-sampling conjugate subgradient solver (estimator-style API).

    Parameters
    ----------
    eps : termination threshold on the modified direction norm.
    m1, m2 : line-search constants, 0.25 <= m2 < m1 < 0.5.
    eta1, eta2 : acceptance-test constants, eta1 > 1, eta2 > 0.
    gamma : radius growth/shrink factor, > 1.
    delta0, delta_max : initial radius and its cap.
    delta_min : radius floor applied on rejections (None: delta0 / 1000).
        The sampling schedule's accuracy argument presupposes a positive
        smallest radius; without a floor, a run whose sample size is capped
        can shrink the radius geometrically and strangle its own steps.
    kappa : accuracy constant of the sampling schedule; None estimates it
        from a small pilot sample as max(4 * Lhat / delta0, 1), Lhat being
        the largest subgradient norm seen at the starting point.
    kappa_eps : failure probability inside the sampling schedule.
    bound_lo, bound_hi : declared bounds [m, M] on the recourse value; None
        falls back to the instance's declared bounds, then to (0, 1).
    max_iter, max_sample : iteration and sample-size caps.
    sampling : "iid" grows a cumulative i.i.d. sample per the schedule;
        "full" uses the exact finite support (requires discrete marginals).
    tau : activation thickness for the lower bounds, relative to the scale
        of the starting point: an incumbent within tau of a bound that the
        direction pushes into is treated as sitting on it.
    eval_fn : optional callable x -> float logged as the held-out estimate.
    eval_every : log eval_fn every this many iterations (always at the end).
    track_trials : record every line-search trial point (feasibility audits).
    record_wall_time : measure per-iteration wall time; False writes 0.0,
        keeping emitted logs byte-reproducible.

    Attributes set by fit: ``x_``, ``history_``, ``diagnostics_``,
    ``trial_points_``, ``converged_``, ``status_``, ``n_iter_``, ``kappa_``,
    ``null_space_``, ``f_in_sample_``, ``d_norm_``.
    """

    def __init__(self, eps=1e-3, m1=0.4, m2=0.3, eta1=2.0, eta2=0.1, gamma=2.0,
                 delta0=1.0, delta_max=100.0, delta_min=None, kappa=None,
                 kappa_eps=0.05, bound_lo=None, bound_hi=None, max_iter=500,
                 max_sample=2000, seed=0, sampling="iid", tau=1e-6,
                 pilot_size=32, max_bisections=60, eval_fn=None, eval_every=1,
                 track_trials=True, record_wall_time=True):
        self.eps = eps
        self.m1 = m1
        self.m2 = m2
        self.eta1 = eta1
        self.eta2 = eta2
        self.gamma = gamma
        self.delta0 = delta0
        self.delta_max = delta_max
        self.delta_min = delta_min
        self.kappa = kappa
        self.kappa_eps = kappa_eps
        self.bound_lo = bound_lo
        self.bound_hi = bound_hi
        self.max_iter = max_iter
        self.max_sample = max_sample
        self.seed = seed
        self.sampling = sampling
        self.tau = tau
        self.pilot_size = pilot_size
        self.max_bisections = max_bisections
        self.eval_fn = eval_fn
        self.eval_every = eval_every
        self.track_trials = track_trials
        self.record_wall_time = record_wall_time

    # -- validation ---------------------------------------------------------

    def _validate(self):
        if not (0.25 <= self.m2 < self.m1 < 0.5):
            raise ValueError("need 0.25 <= m2 < m1 < 0.5")
        if not self.eta1 > 1.0:
            raise ValueError("eta1 must exceed 1")
        if not self.eta2 > 0.0:
            raise ValueError("eta2 must be positive")
        if not self.gamma > 1.0:
            raise ValueError("gamma must exceed 1")
        if not 0.0 < self.delta0 <= self.delta_max:
            raise ValueError("need 0 < delta0 <= delta_max")
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.kappa_eps < 1.0:
            raise ValueError("kappa_eps must lie in (0, 1)")
        if self.max_iter < 1 or self.max_sample < 1:
            raise ValueError("max_iter and max_sample must be >= 1")
        if self.sampling not in ("iid", "full"):
            raise ValueError("sampling must be 'iid' or 'full'")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")

    def _recourse_bounds(self, problem):
        lo = self.bound_lo if self.bound_lo is not None else problem.recourse_lo
        hi = self.bound_hi if self.bound_hi is not None else problem.recourse_hi
        if lo is None:
            lo = 0.0
        if hi is None:
            hi = 1.0
        if hi < lo:
            raise ValueError(f"recourse bounds out of order: [{lo}, {hi}]")
        return float(lo), float(hi)

    def _pilot_kappa(self, problem, x0):
        if self.kappa is not None:
            return float(self.kappa)
        rng = substream(self.seed, "pilot")
        pilot = model.draw_scenarios(problem, rng, self.pilot_size)
        base = problem.Q @ x0 + problem.c
        L_hat = 0.0
        for i, s in enumerate(pilot):
            sol = oracle.solve_recourse(problem, s, x0)
            oracle.require_optimal(sol, i)
            L_hat = max(L_hat, float(np.linalg.norm(base - s.C.T @ sol.pi)))
        return max(4.0 * L_hat / self.delta0, 1.0)

    # -- main loop ----------------------------------------------------------

    # -- active lower bounds --------------------------------------------------

    @staticmethod
    def _face_basis(problem, active, cache):
        """Null-space basis of the equality rows plus the active bounds."""
        Zf = cache.get(active)
        if Zf is not None or active in cache:
            return Zf
        rows = [problem.A]
        n1 = problem.n1
        for i in sorted(active):
            e = np.zeros(n1)
            e[i] = 1.0
            rows.append(e.reshape(1, -1))
        try:
            Zf = linalg.null_space_basis(np.vstack(rows))
        except EmptyNullSpace:
            Zf = None  # the face is a single point
        cache[active] = Zf
        return Zf

    @staticmethod
    def _pin_to_face(problem, x, active):
        """Orthogonal projection onto {Ax = b, x_i = lb_i for active i}.

        Used after a bound is declared active while the incumbent sits within
        the activation thickness of it: moving the coordinate alone would
        leave {Ax = b}, so the whole point is corrected.
        """
        if not active:
            return x
        n1 = problem.n1
        rows = [problem.A]
        rhs = [problem.b]
        for i in sorted(active):
            e = np.zeros(n1)
            e[i] = 1.0
            rows.append(e.reshape(1, -1))
            rhs.append(np.array([problem.lower_bounds[i]]))
        M = np.vstack(rows)
        r = M @ x - np.concatenate(rhs)
        corr, *_ = np.linalg.lstsq(M, r, rcond=None)
        z = x - corr
        for i in active:
            z[i] = problem.lower_bounds[i]
        return z

    def _release_candidate(self, problem, F_S, x_hat, active, face_cache, delta):
        """(bound index, unit descent direction) whose release descends, or None.

        At a face minimum the oracle hands back one element of a possibly
        large subdifferential, so multiplier estimates are unreliable at
        kinks; instead the post-release steepest direction (the projected
        negative subgradient on the enlarged face) is evaluated at several
        step scales up to the radius.  For a convex objective an average
        slope below -eps at any feasible scale certifies real descent no
        matter which subgradient the oracle picked, so the test cannot be
        fooled by a kink sitting at the incumbent.
        """
        f0 = F_S.value(x_hat)
        g_inc = F_S.subgrad(x_hat)
        lb = problem.lower_bounds
        tau0 = 1e-6 * (1.0 + float(np.linalg.norm(x_hat)))
        reach = max(delta, self.delta0)
        best, best_rate = None, np.inf
        for i in sorted(active):
            Zr = self._face_basis(problem, active - {i}, face_cache)
            if Zr is None:
                continue
            rays = []
            steepest = -linalg.project_null(Zr, g_inc)
            nd = float(np.linalg.norm(steepest))
            if nd > 1e-12 and steepest[i] > 1e-9 * nd:
                rays.append(steepest / nd)
            if not rays:
                # Steepest does not leave the bound; fall back to the
                # coordinate ray projected onto the enlarged face.
                e = np.zeros(problem.n1)
                e[i] = 1.0
                coord = linalg.project_null(Zr, e)
                ncd = float(np.linalg.norm(coord))
                if ncd > 1e-12 and coord[i] > 1e-9 * ncd:
                    rays.append(coord / ncd)
            for direction in rays:
                # Longest strictly feasible probe along this ray.
                t_cap = reach
                if lb is not None:
                    falling = np.isfinite(lb) & (direction < -1e-12)
                    for j in np.flatnonzero(falling):
                        t_cap = min(t_cap, 0.5 * (x_hat[j] - lb[j]) / (-direction[j]))
                if t_cap <= 0.0:
                    continue
                for t in (min(tau0, t_cap), 0.1 * t_cap, t_cap):
                    if t <= 0.0:
                        continue
                    rate = (F_S.value(x_hat + t * direction) - f0) / t
                    if rate < best_rate:
                        best, best_rate = (i, direction), rate
        return best, best_rate

    def _release_step(self, x_hat, lb, thickness, i, direction):
        """Step off bound i far enough to clear the activation thickness.

        The step is shortened when another inactive bound is closer than the
        clearance would require, so it stays strictly feasible.
        """
        step = 2.0 * thickness / direction[i]
        falling = np.isfinite(lb) & (direction < -1e-12)
        for j in np.flatnonzero(falling):
            step = min(step, 0.4 * (x_hat[j] - lb[j]) / (-direction[j]))
        return x_hat + step * direction

    def _caps(self, x, d, delta, lb, active):
        """(t_max, bound_blocked): radius cap and ratio test over inactive bounds."""
        dn = float(np.linalg.norm(d))
        t_ball = delta / dn
        t_bound = np.inf
        if lb is not None:
            dec = (d < -1e-13 * (1.0 + np.abs(d).max())) & np.isfinite(lb)
            for i in np.flatnonzero(dec):
                if i in active:
                    continue
                t_bound = min(t_bound, (x[i] - lb[i]) / (-d[i]))
        t_max = min(t_ball, t_bound)
        if t_max <= 1e-14 * max(1.0, t_ball):
            raise ZeroCap("no strictly positive feasible step along the direction")
        return t_max, bool(t_bound <= t_ball)

    def fit(self, problem):
        self._validate()
        lo, hi = self._recourse_bounds(problem)
        spread = hi - lo
        x0 = model.initial_feasible_point(problem)
        lb = problem.lower_bounds

        self.history_ = []
        self.diagnostics_ = []
        self.trial_points_ = []

        try:
            Z = linalg.null_space_basis(problem.A)
        except EmptyNullSpace:
            # The feasible set is a single point; nothing to optimize.
            self._finalize_fixed_point(problem, x0)
            return self
        self.null_space_ = Z
        self.kappa_ = self._pilot_kappa(problem, x0)

        screen_cache = {"order": [], "info": {}}
        if self.sampling == "full":
            S = model.enumerate_support(problem)
            F_S = oracle.SaaFunction(problem, S, screen_cache=screen_cache)
        else:
            n0 = sample_size(self.kappa_eps, spread, self.kappa_, self.delta0, self.max_sample)
            S = model.draw_scenarios(problem, substream(self.seed, "grow", 0), n0)
            F_S = oracle.SaaFunction(problem, S, screen_cache=screen_cache)

        x_hat = x0
        scale0 = 1.0 + float(np.abs(x0).max(initial=0.0))
        thickness = self.tau * scale0
        if self.delta_min is not None:
            delta_floor = self.delta_min
        else:
            # Keep the floor low enough that the norm condition
            # ||d|| > eta2 * delta can still pass near termination.
            delta_floor = min(self.delta0 * 1e-3, 0.1 * self.eps / self.eta2)
        if delta_floor > self.delta0:
            raise ValueError("delta_min must not exceed delta0")
        face_cache = {}
        active = frozenset()
        Z_face = self._face_basis(problem, active, face_cache)
        d_prev = np.zeros(problem.n1)
        delta = float(self.delta0)
        converged = False
        status = "max_iter"
        g_carry = None  # subgradient carried from the previous line search's exit point
        stale_count = 0
        optimism_budget = 2 * problem.n1
        k = 0
        while k < self.max_iter:
            k += 1
            tic = time.perf_counter() if self.record_wall_time else 0.0

            # Epsilon-active set: every bound the incumbent sits within the
            # activation thickness of is pinned (the incumbent is projected
            # onto that face, keeping the equality rows exact).
            if lb is not None:
                close = np.isfinite(lb) & (x_hat - lb <= thickness)
                new_active = frozenset(np.flatnonzero(close).tolist())
                if new_active != active:
                    active = new_active
                    x_hat = self._pin_to_face(problem, x_hat, active)
                    Z_face = self._face_basis(problem, active, face_cache)
                    d_prev = np.zeros(problem.n1)
                    g_carry = None

            g = g_carry if g_carry is not None else F_S.subgrad(x_hat)

            # Direction on the current face.  When it collapses, either
            # release a bound (taking a small certified-descent step off it)
            # or stop.
            terminate = False
            t_max = 0.0
            guard = 0
            while True:
                guard += 1
                if guard > problem.n1 + 3:
                    raise NumericalBreakdown("release loop did not settle")
                if Z_face is None:
                    g_t = np.zeros(problem.n1)
                    d_prev_t = np.zeros(problem.n1)
                else:
                    g_t = linalg.project_null(Z_face, g)
                    d_prev_t = linalg.project_null(Z_face, d_prev)
                lam = lambda_star(g_t, d_prev_t)
                d = -(lam * (-d_prev_t) + (1.0 - lam) * g_t)
                dn = float(np.linalg.norm(d))
                if dn > self.eps:
                    break
                if active:
                    cand, rate = self._release_candidate(
                        problem, F_S, x_hat, active, face_cache, delta)
                else:
                    cand, rate = None, np.inf
                certified = rate < -self.eps
                if cand is None or (not certified and optimism_budget == 0):
                    terminate = True
                    break
                if not certified:
                    # No probe certified descent, but the probes only look
                    # along one ray per bound; spend bounded optimism letting
                    # the search explore the enlarged face directly.
                    optimism_budget -= 1
                (i_rel, rel_dir) = cand
                x_hat = self._release_step(x_hat, lb, thickness, i_rel, rel_dir)
                active = active - {i_rel}
                Z_face = self._face_basis(problem, active, face_cache)
                d_prev = np.zeros(problem.n1)
                g = F_S.subgrad(x_hat)
            dot_dg = float(d @ g_t)

            if terminate:
                converged = True
                status = "converged"
                f_S = F_S.value(x_hat)
                wall = (time.perf_counter() - tic) * 1e3 if self.record_wall_time else 0.0
                self.history_.append(IterateRecord(
                    k=k, f_S=f_S, f_eval=self._eval(x_hat, k, final=True),
                    d_norm=dn, delta=delta, sample_size=len(F_S), step_t=0.0,
                    accepted=False, wall_ms=wall))
                self.diagnostics_.append(IterationDiagnostics(
                    k=k, lam=lam, g_norm=float(np.linalg.norm(g_t)),
                    g_post_norm=float(np.linalg.norm(g_t)), dot_dg=dot_dg,
                    d_norm=dn, t_max=0.0, ls_reason="terminated", ls_evals=0,
                    f_before=f_S, f_after=f_S, accepted=False))
                break

            try:
                t_max, _ = self._caps(x_hat, d, delta, lb, active)
                ls = line_search(F_S, Z_face, x_hat, d, self.m1, self.m2, t_max,
                                 self.max_bisections, accept_boundary=True,
                                 boundary_floor=thickness)
            except ZeroCap:
                t_max = 0.0
                ls = LineSearchResult(False, reason="zero_cap", f_before=F_S.value(x_hat))
            if self.track_trials:
                self.trial_points_.extend(ls.trial_points)

            # Sample growth at the current radius, then the replication test
            # on the grown sample average.
            if self.sampling == "iid":
                target = sample_size(self.kappa_eps, spread, self.kappa_, delta, self.max_sample)
                if target > len(F_S):
                    extra = model.draw_scenarios(
                        problem, substream(self.seed, "grow", k), target - len(F_S))
                    F_S.extend(extra)
                F_T = oracle.SaaFunction(
                    problem,
                    model.draw_scenarios(problem, substream(self.seed, "test_set", k), len(F_S)),
                    basis_hint=F_S._basis_hint,
                    screen_cache=screen_cache,
                )
            else:
                F_T = F_S

            accepted = False
            if ls.success:
                accepted = acceptance_test(F_S, F_T, ls.x_new, x_hat, dn,
                                           self.eta1, self.eta2, delta)
            if accepted:
                # New bounds the step landed on are picked up by the
                # epsilon-active refresh at the top of the next iteration.
                x_hat = ls.x_new
                delta = min(self.gamma * delta, self.delta_max)
            else:
                delta = max(delta / self.gamma, delta_floor)

            # Subgradient source for the next direction, on the grown sample:
            # the (possibly new) incumbent after a successful search, but the
            # hardest-cutting trial point after a failed one.  A failed
            # search means no step satisfied both line-search conditions,
            # typically because a kink sits between the brackets; folding the
            # far-side slope into the next convex combination is what lets
            # the direction shrink or turn along the kink instead of
            # stalling.
            if accepted or ls.success:
                carry_point = x_hat
            elif ls.x_cut is not None:
                carry_point = ls.x_cut
            else:
                carry_point = x_hat
            g_carry = F_S.subgrad(carry_point)
            g_post = g_carry if carry_point is x_hat else F_S.subgrad(x_hat)
            f_S = F_S.value(x_hat)
            wall = (time.perf_counter() - tic) * 1e3 if self.record_wall_time else 0.0
            self.history_.append(IterateRecord(
                k=k, f_S=f_S, f_eval=self._eval(x_hat, k),
                d_norm=dn, delta=delta, sample_size=len(F_S),
                step_t=ls.t if ls.success else 0.0,
                accepted=accepted, wall_ms=wall))
            self.diagnostics_.append(IterationDiagnostics(
                k=k, lam=lam, g_norm=float(np.linalg.norm(g_t)),
                g_post_norm=float(np.linalg.norm(linalg.project_null(Z, g_post))),
                dot_dg=dot_dg, d_norm=dn, t_max=t_max, ls_reason=ls.reason,
                ls_evals=ls.n_evals, f_before=ls.f_before, f_after=ls.f_after,
                accepted=accepted))
            if accepted and not ls.boundary:
                # Serious step: restart the convex combination.  Conjugacy
                # is only meaningful across null steps at one incumbent;
                # keeping a (possibly tiny) stale direction after a move
                # would dominate every later minimum-norm combination.
                # Boundary (cap-extension) steps keep the memory: they end
                # where the cap ended, not where the search was done.
                d_prev = np.zeros(problem.n1)
                stale_count = 0
            elif not accepted and float(np.linalg.norm(d - d_prev)) <= 1e-12 * (1.0 + dn):
                # The combination reproduced itself through a failed search:
                # no new slope information arrived.  Drop the memory so the
                # next direction restarts from the raw projected subgradient.
                stale_count += 1
                if stale_count >= 2:
                    d_prev = np.zeros(problem.n1)
                    g_carry = None
                    stale_count = 0
                else:
                    d_prev = d
            else:
                d_prev = d
                stale_count = 0

        self.x_ = x_hat
        self.converged_ = converged
        self.status_ = status
        self.n_iter_ = k
        self.f_in_sample_ = F_S.value(x_hat)
        self.d_norm_ = self.history_[-1].d_norm if self.history_ else 0.0
        return self

    def _eval(self, x, k, final=False):
        if self.eval_fn is None:
            return float("nan")
        if final or self.eval_every <= 1 or k % self.eval_every == 0:
            return float(self.eval_fn(x))
        return float("nan")

    def _finalize_fixed_point(self, problem, x0):
        x = x0
        if problem.lower_bounds is not None and np.any(x < problem.lower_bounds - 1e-9):
            raise InfeasibleRegion("unique feasible point violates the lower bounds")
        scen = model.draw_scenarios(problem, substream(self.seed, "grow", 0), 1)
        F = oracle.SaaFunction(problem, scen)
        self.x_ = x
        self.converged_ = True
        self.status_ = "unique_point"
        self.n_iter_ = 0
        self.kappa_ = self.kappa if self.kappa is not None else 1.0
        self.null_space_ = None
        self.f_in_sample_ = F.value(x)
        self.d_norm_ = 0.0
        self.history_.append(IterateRecord(
            k=1, f_S=self.f_in_sample_, f_eval=self._eval(x, 1, final=True),
            d_norm=0.0, delta=self.delta0, sample_size=len(F), step_t=0.0,
            accepted=False, wall_ms=0.0))
