"""Projected stochastic subgradient descent and (Euclidean) stochastic mirror descent.

Both baselines consume identical scenario streams for identical seeds and
batch schedules: batch k always comes from the ("batch", k) substream of the
master seed, independent of which solver is running.  That is the fairness
contract the comparison harness relies on.
"""

import time

import numpy as np

from . import linalg, model, oracle
from .base import ParamsMixin
from .records import IterateRecord
from .rng import substream


class _BaselineSolver(ParamsMixin):
    averaging_default = "last"

    def __init__(self, step_rule="inv_sqrt", c=None, G_bound=1.0, batch=8,
                 iters=200, seed=0, averaging=None, eval_fn=None, eval_every=1,
                 record_wall_time=True):
        self.step_rule = step_rule
        self.c = c
        self.G_bound = G_bound
        self.batch = batch
        self.iters = iters
        self.seed = seed
        self.averaging = averaging
        self.eval_fn = eval_fn
        self.eval_every = eval_every
        self.record_wall_time = record_wall_time

    def _validate(self):
        if self.step_rule not in ("constant", "inv_sqrt"):
            raise ValueError("step_rule must be 'constant' or 'inv_sqrt'")
        if self.c is not None and not self.c > 0.0:
            raise ValueError("c must be positive")
        if not self.G_bound > 0.0:
            raise ValueError("G_bound must be positive")
        if self.batch < 1 or self.iters < 1:
            raise ValueError("batch and iters must be >= 1")
        if (self.averaging or self.averaging_default) not in ("last", "uniform"):
            raise ValueError("averaging must be 'last' or 'uniform'")

    def _step(self, k):
        raise NotImplementedError

    def _auto_scale(self, problem, x0):
        """Default step constant from a small pilot: domain-radius / subgradient-norm.

        The classical sqrt-rate step policy; the pilot supplies the scale when
        the caller does not.
        """
        rng = substream(self.seed, "pilot")
        pilot = model.draw_scenarios(problem, rng, 32)
        F = oracle.SaaFunction(problem, pilot)
        g_hat = float(np.linalg.norm(F.subgrad(x0)))
        d_hat = 1.0 + float(np.linalg.norm(x0))
        return d_hat, max(g_hat, 1e-8)

    def fit(self, problem):
        self._validate()
        averaging = self.averaging or self.averaging_default
        x = model.initial_feasible_point(problem)
        lb = problem.lower_bounds
        A, b = problem.A, problem.b
        self._resolve_scale(problem, x)
        x_sum = x.copy()
        self.history_ = []
        for k in range(1, self.iters + 1):
            tic = time.perf_counter() if self.record_wall_time else 0.0
            batch = model.draw_scenarios(problem, substream(self.seed, "batch", k), self.batch)
            F = oracle.SaaFunction(problem, batch)
            g = F.subgrad(x)
            alpha = self._step(k)
            x_raw = x - alpha * g
            if lb is not None and np.any(np.isfinite(lb)):
                x = linalg.project_polyhedral(A, b, lb, x_raw)
            else:
                x = linalg.project_affine(A, b, x_raw)
            x_sum += x
            rep = x_sum / (k + 1) if averaging == "uniform" else x
            f_S = F.value(rep)
            final = k == self.iters
            if self.eval_fn is not None and (final or self.eval_every <= 1 or k % self.eval_every == 0):
                f_eval = float(self.eval_fn(rep))
            else:
                f_eval = float("nan")
            wall = (time.perf_counter() - tic) * 1e3 if self.record_wall_time else 0.0
            self.history_.append(IterateRecord(
                k=k, f_S=f_S, f_eval=f_eval, d_norm=float(np.linalg.norm(g)),
                delta=0.0, sample_size=self.batch, step_t=alpha, accepted=True,
                wall_ms=wall))
        self.x_ = x_sum / (self.iters + 1) if averaging == "uniform" else x
        self.n_iter_ = self.iters
        self.status_ = "max_iter"
        self.converged_ = False
        return self


class SgdSolver(_BaselineSolver):
    """Projected stochastic subgradient descent: x <- proj(x - alpha_k g_k).

    alpha_k is ``c`` (constant) or ``c / sqrt(k)``; when c is None it is set
    from a pilot estimate of domain radius over subgradient norm.  g_k is a
    batch sample-average subgradient; proj is the Euclidean projection onto
    {Ax = b} intersected with the lower bounds when present.
    """

    averaging_default = "last"

    def _resolve_scale(self, problem, x0):
        if self.c is None:
            d_hat, g_hat = self._auto_scale(problem, x0)
            self._c = d_hat / g_hat
        else:
            self._c = float(self.c)

    def _step(self, k):
        return self._c if self.step_rule == "constant" else self._c / np.sqrt(k)


class SmdSolver(_BaselineSolver):
    """Stochastic mirror descent with the Euclidean distance-generating function.

    The prox step then coincides with a projected subgradient step of size
    c / (G_bound sqrt(k)); ``G_bound`` is the user-supplied bound on the
    subgradient norm the method requires up front, and ``c`` absorbs the
    domain-diameter constant of the step policy (None estimates the
    diameter from a pilot).  Uniform iterate averaging is the default
    representative point.
    """

    averaging_default = "uniform"

    def _resolve_scale(self, problem, x0):
        if self.c is None:
            d_hat, _ = self._auto_scale(problem, x0)
            self._c = d_hat
        else:
            self._c = float(self.c)

    def _step(self, k):
        base = self._c / self.G_bound
        return base if self.step_rule == "constant" else base / np.sqrt(k)


def sgd_run(problem, **params):
    """Functional wrapper: fitted SgdSolver's (x_, history_)."""
    s = SgdSolver(**params).fit(problem)
    return s.x_, s.history_


def smd_run(problem, **params):
    """Functional wrapper: fitted SmdSolver's (x_, history_)."""
    s = SmdSolver(**params).fit(problem)
    return s.x_, s.history_
