import numpy as np
import pytest

from scsopt.exceptions import DimensionMismatch
from scsopt.model import (
    Discrete,
    Normal,
    RandomEntry,
    Scenario,
    ScenarioSampler,
    ScenarioSet,
    TwoStageProblem,
    Uniform,
    draw_scenarios,
    enumerate_support,
    extensive_form,
    initial_feasible_point,
    true_objective,
)
from scsopt.rng import substream


def simple_problem(**kw):
    defaults = dict(
        Q=np.zeros((2, 2)), c=[1.0, 2.0], A=[[1.0, 1.0]], b=[1.0],
        D=np.hstack([np.eye(2), -np.eye(2)]), d=[1.0, 1.0, 2.0, 2.0],
        xi=[0.5, 0.5], C=[[0.3, 0.0], [0.0, 0.3]],
    )
    defaults.update(kw)
    return TwoStageProblem(**defaults)


class TestValidation:
    def test_rejects_asymmetric_q(self):
        with pytest.raises(ValueError, match="symmetric"):
            simple_problem(Q=[[0.0, 1.0], [0.0, 0.0]])

    def test_rejects_non_pd_p(self):
        with pytest.raises(ValueError, match="positive definite"):
            simple_problem(P=-np.eye(4))

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            simple_problem(c=[np.nan, 0.0])

    def test_rejects_bad_dims(self):
        with pytest.raises(DimensionMismatch):
            simple_problem(C=np.zeros((3, 2)))

    def test_discrete_probs_must_sum(self):
        with pytest.raises(ValueError, match="sum"):
            Discrete((0.0, 1.0), (0.5, 0.4))

    def test_scenario_weights_must_sum(self):
        s = Scenario(xi=np.zeros(1), C=np.zeros((1, 1)), weight=0.25)
        with pytest.raises(ValueError, match="sum"):
            ScenarioSet([s, s])


class TestSampling:
    def test_single_support_point(self):
        p = simple_problem(stochastic_map=[
            RandomEntry("rhs", 0, dist=Discrete((2.5,), (1.0,)))])
        got = ScenarioSampler(p, seed=1).sample(1)
        assert len(got) == 1
        assert got[0].xi[0] == 2.5
        assert got[0].weight == 1.0

    def test_same_seed_same_stream(self):
        p = simple_problem(stochastic_map=[
            RandomEntry("rhs", 0, dist=Normal(0.0, 1.0)),
            RandomEntry("tech", 1, 0, dist=Uniform(-1.0, 1.0))])
        a = ScenarioSampler(p, seed=42).sample(100)
        b = ScenarioSampler(p, seed=42).sample(100)
        for s, t in zip(a, b):
            np.testing.assert_array_equal(s.xi, t.xi)
            np.testing.assert_array_equal(s.C, t.C)

    def test_stream_advances_between_calls(self):
        p = simple_problem(stochastic_map=[
            RandomEntry("rhs", 0, dist=Normal(0.0, 1.0))])
        sampler = ScenarioSampler(p, seed=0)
        first = sampler.sample(10)
        second = sampler.sample(10)
        assert not np.array_equal(
            [s.xi[0] for s in first], [s.xi[0] for s in second])

    def test_empirical_mean_binomial_bound(self):
        p = simple_problem(stochastic_map=[
            RandomEntry("rhs", 0, dist=Discrete((0.0, 1.0), (0.5, 0.5)))])
        got = ScenarioSampler(p, seed=3).sample(10_000)
        mean = np.mean([s.xi[0] for s in got])
        assert 0.47 <= mean <= 0.53

    def test_support_enumeration_weights(self):
        p = simple_problem(stochastic_map=[
            RandomEntry("rhs", 0, dist=Discrete((1.0, 2.0, 3.0), (0.2, 0.3, 0.5))),
            RandomEntry("rhs", 1, dist=Discrete((0.0, 1.0), (0.4, 0.6)))])
        sup = enumerate_support(p)
        assert len(sup) == 6
        assert sum(s.weight for s in sup) == pytest.approx(1.0, abs=1e-12)

    def test_spawned_substreams_differ(self):
        p = simple_problem(stochastic_map=[
            RandomEntry("rhs", 0, dist=Normal(0.0, 1.0))])
        s = ScenarioSampler(p, seed=9)
        a = s.spawn("grow", 1).sample(5)
        b = s.spawn("test_set", 1).sample(5)
        assert not np.array_equal([x.xi[0] for x in a], [x.xi[0] for x in b])


class TestExtensiveForm:
    def test_single_scenario_lp_matches_direct(self):
        p = simple_problem(lower_bounds=[0.0, 0.0])
        scen = ScenarioSet([Scenario(xi=np.array([2.0, 1.0]), C=p.C.copy(), weight=1.0)])
        sol = extensive_form(p, scen).solve()
        assert sol.status == "optimal"
        # grid-search oracle over the feasible segment x1 + x2 = 1, x >= 0
        best = min(true_objective(p, scen, np.array([t, 1.0 - t]))
                   for t in np.linspace(0.0, 1.0, 2001))
        assert sol.value == pytest.approx(best, abs=1e-3)

    def test_two_scenarios_average(self):
        p = simple_problem(lower_bounds=[0.0, 0.0])
        s1 = Scenario(xi=np.array([2.0, 1.0]), C=p.C.copy(), weight=0.5)
        s2 = Scenario(xi=np.array([1.0, 2.0]), C=p.C.copy(), weight=0.5)
        pair = ScenarioSet([s1, s2])
        x = np.array([0.4, 0.6])
        one = true_objective(p, ScenarioSet([Scenario(s1.xi, s1.C, 1.0)]), x)
        two = true_objective(p, ScenarioSet([Scenario(s2.xi, s2.C, 1.0)]), x)
        both = true_objective(p, pair, x)
        assert both == pytest.approx(0.5 * one + 0.5 * two, abs=1e-10)

    def test_small_sqlp_grid_search(self):
        rng = np.random.default_rng(4)
        p = simple_problem(
            Q=np.diag([1.0, 1.5]), c=[-1.0, -0.5], lower_bounds=[0.0, 0.0],
            stochastic_map=[RandomEntry("rhs", 0, dist=Discrete((0.2, 0.6, 1.1), (0.3, 0.4, 0.3)))])
        sup = enumerate_support(p)
        sol = extensive_form(p, sup).solve()
        best = min(true_objective(p, sup, np.array([t, 1.0 - t]))
                   for t in np.linspace(0.0, 1.0, 3001))
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(best, abs=1e-3)

    def test_quadratic_recourse_extensive(self):
        p = simple_problem(Q=np.eye(2), P=np.eye(4), lower_bounds=[0.0, 0.0])
        sup = ScenarioSet([Scenario(xi=np.array([1.0, 0.5]), C=p.C.copy(), weight=1.0)])
        sol = extensive_form(p, sup).solve()
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(true_objective(p, sup, sol.x), abs=1e-6)

    def test_value_matches_true_objective_at_optimum(self):
        p = simple_problem(Q=np.eye(2), c=[-0.5, -1.5], lower_bounds=[0.0, 0.0],
                           stochastic_map=[RandomEntry("rhs", 1, dist=Discrete((0.3, 0.7, 1.4), (0.2, 0.5, 0.3)))])
        sup = enumerate_support(p)
        sol = extensive_form(p, sup).solve()
        assert abs(sol.value - true_objective(p, sup, sol.x)) <= 1e-6


class TestTrueObjective:
    def test_zero_second_stage(self):
        p = simple_problem(d=[0.0, 0.0, 0.0, 0.0])
        scen = ScenarioSet([Scenario(xi=p.xi.copy(), C=p.C.copy(), weight=1.0)])
        x = np.array([0.5, 0.5])
        assert true_objective(p, scen, x) == pytest.approx(p.first_stage_cost(x), abs=1e-12)

    def test_convexity_along_segments(self):
        p = simple_problem(Q=np.eye(2),
                           stochastic_map=[RandomEntry("rhs", 0, dist=Discrete((0.1, 0.9), (0.5, 0.5)))])
        sup = enumerate_support(p)
        rng = np.random.default_rng(8)
        for _ in range(25):
            u, v = rng.normal(size=2), rng.normal(size=2)
            x1 = initial_feasible_point(p) + np.array([u[0], -u[0]])
            x2 = initial_feasible_point(p) + np.array([v[0], -v[0]])
            t = rng.uniform()
            lhs = true_objective(p, sup, t * x1 + (1 - t) * x2)
            rhs = t * true_objective(p, sup, x1) + (1 - t) * true_objective(p, sup, x2)
            assert lhs <= rhs + 1e-8


def test_initial_feasible_point_respects_bounds():
    # affine projection of the origin lands at (1.5, -1.5); bound repair must fix it
    p = simple_problem(A=[[1.0, -1.0]], b=[3.0], lower_bounds=[0.0, 0.0])
    x0 = initial_feasible_point(p)
    assert np.abs(p.A @ x0 - p.b).max() <= 1e-8 * (1 + np.abs(p.b).max())
    assert x0.min() >= -1e-9


def test_draw_scenarios_equal_weights():
    p = simple_problem(stochastic_map=[RandomEntry("rhs", 0, dist=Uniform(0.0, 1.0))])
    got = draw_scenarios(p, substream(1, "sample"), 8)
    assert all(s.weight == pytest.approx(1.0 / 8) for s in got)
