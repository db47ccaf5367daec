import numpy as np
import pytest

from scsopt.exceptions import RecourseInfeasible
from scsopt.model import Discrete, RandomEntry, Scenario, TwoStageProblem, enumerate_support, true_objective
from scsopt.oracle import (
    SaaFunction,
    closed_form_dual_value,
    closed_form_multiplier,
    saa_subgrad,
    saa_value,
    solve_recourse,
    subgrad_ql,
    subgrad_qq,
)
from scsopt.rng import substream
from scsopt.model import draw_scenarios


def lp_problem(**kw):
    defaults = dict(
        Q=np.zeros((1, 1)), c=[0.0], A=[[1.0]], b=[1.0],
        D=[[1.0]], d=[1.0], xi=[2.0], C=[[1.0]],
    )
    defaults.update(kw)
    return TwoStageProblem(**defaults)


def complete_recourse_problem(rng, n1=3, m2=2, n_base=2, quadratic=False, seed_entries=True):
    D = np.hstack([rng.uniform(-1, 1, (m2, n_base)), np.eye(m2), -np.eye(m2)])
    n2 = n_base + 2 * m2
    d = np.concatenate([rng.uniform(0.3, 1.0, n_base), np.full(2 * m2, 3.0)])
    C = rng.uniform(-0.6, 0.6, (m2, n1))
    entries = []
    if seed_entries:
        entries = [RandomEntry("rhs", 0, dist=Discrete((0.1, 0.5, 0.9), (0.3, 0.4, 0.3)))]
    return TwoStageProblem(
        Q=np.eye(n1), c=np.zeros(n1), A=np.ones((1, n1)), b=[1.0],
        D=D, d=d, xi=rng.normal(scale=0.3, size=m2), C=C,
        P=np.diag(rng.uniform(0.8, 1.6, n2)) if quadratic else None,
        stochastic_map=entries,
    )


class TestLpRecourse:
    def test_scalar_analytic(self):
        p = lp_problem()
        s = Scenario(xi=np.array([2.0]), C=np.array([[1.0]]), weight=1.0)
        h, v = subgrad_ql(p, np.array([1.0]), s)
        assert h == pytest.approx(1.0)
        np.testing.assert_allclose(v, [-1.0])

    def test_infeasible_rhs(self):
        p = lp_problem()
        s = Scenario(xi=np.array([-1.0]), C=np.array([[0.0]]), weight=1.0)
        sol = solve_recourse(p, s, np.array([1.0]))
        assert sol.status == "infeasible"
        with pytest.raises(RecourseInfeasible):
            subgrad_ql(p, np.array([1.0]), s)

    def test_zero_technology_matrix(self):
        p = lp_problem(C=[[0.0]])
        s = Scenario(xi=np.array([2.0]), C=np.array([[0.0]]), weight=1.0)
        _, v = subgrad_ql(p, np.array([1.0]), s)
        np.testing.assert_allclose(v, [0.0])

    def test_subgradient_inequality_random(self):
        rng = np.random.default_rng(2)
        p = complete_recourse_problem(rng)
        scen = draw_scenarios(p, substream(0, "sample"), 5)
        for s in scen:
            for _ in range(20):
                x = rng.normal(size=p.n1)
                x2 = rng.normal(size=p.n1)
                h, v = subgrad_ql(p, x, s)
                h2, _ = subgrad_ql(p, x2, s)
                assert h2 >= h + v @ (x2 - x) - 1e-8


class TestQpRecourse:
    def test_scalar_analytic(self):
        p = lp_problem(d=[0.0], xi=[1.0], P=[[1.0]])
        s = Scenario(xi=np.array([1.0]), C=np.array([[1.0]]), weight=1.0)
        sol = solve_recourse(p, s, np.array([0.0]))
        assert sol.status == "optimal"
        np.testing.assert_allclose(sol.y, [1.0], atol=1e-9)
        assert sol.h == pytest.approx(0.5)
        np.testing.assert_allclose(sol.pi, [1.0], atol=1e-9)
        h, g = subgrad_qq(p, np.array([0.0]), s)
        assert h == pytest.approx(0.5)
        np.testing.assert_allclose(g, [-1.0], atol=1e-9)

    def test_subgradient_inequality_random(self):
        rng = np.random.default_rng(3)
        p = complete_recourse_problem(rng, quadratic=True)
        scen = draw_scenarios(p, substream(1, "sample"), 3)
        for s in scen:
            for _ in range(20):
                x = rng.normal(size=p.n1)
                x2 = rng.normal(size=p.n1)
                h, v = subgrad_qq(p, x, s)
                h2, _ = subgrad_qq(p, x2, s)
                assert h2 >= h + v @ (x2 - x) - 1e-8

    def test_wrong_dispatch_raises(self):
        p = lp_problem()
        s = Scenario(xi=np.array([2.0]), C=np.array([[1.0]]), weight=1.0)
        with pytest.raises(ValueError):
            subgrad_qq(p, np.array([1.0]), s)


class TestClosedFormDual:
    def test_value_at_primal_multipliers(self):
        rng = np.random.default_rng(5)
        checked = 0
        p = complete_recourse_problem(rng, quadratic=True)
        scen = draw_scenarios(p, substream(2, "sample"), 10)
        for s in scen:
            x = rng.normal(size=p.n1)
            sol = solve_recourse(p, s, x)
            assert sol.status == "optimal"
            dv = closed_form_dual_value(p, s, x, sol.mu)
            assert abs(dv - sol.h) <= 1e-6 * (1.0 + abs(sol.h))
            checked += 1
        assert checked == 10

    def test_projected_stationary_point_when_well_posed(self):
        # scalar case: the projected stationary point is the true maximizer
        p = lp_problem(d=[0.0], xi=[1.0], P=[[1.0]])
        s = Scenario(xi=np.array([1.0]), C=np.array([[1.0]]), weight=1.0)
        x = np.array([0.0])
        s_star, well_posed = closed_form_multiplier(p, s, x)
        assert well_posed
        sol = solve_recourse(p, s, x)
        assert closed_form_dual_value(p, s, x, s_star) == pytest.approx(sol.h, abs=1e-9)

    def test_ill_posed_cases_are_flagged_or_agree(self):
        rng = np.random.default_rng(6)
        p = complete_recourse_problem(rng, quadratic=True)
        scen = draw_scenarios(p, substream(3, "sample"), 10)
        agreements = 0
        for s in scen:
            x = rng.normal(size=p.n1)
            s_star, well_posed = closed_form_multiplier(p, s, x)
            if well_posed:
                sol = solve_recourse(p, s, x)
                assert abs(closed_form_dual_value(p, s, x, s_star) - sol.h) <= 1e-6 * (1 + abs(sol.h))
                agreements += 1
        # at minimum the check must never mislabel; agreement count is informational


class TestSaaFunction:
    def test_single_scenario_reduces(self):
        p = lp_problem()
        s = Scenario(xi=np.array([2.0]), C=np.array([[1.0]]), weight=1.0)
        F = SaaFunction(p, [s])
        x = np.array([1.0])
        h, v = subgrad_ql(p, x, s)
        assert saa_value(F, x) == pytest.approx(p.first_stage_cost(x) + h)
        np.testing.assert_allclose(saa_subgrad(F, x), p.Q @ x + p.c + v)

    def test_affine_region_constant_subgradient(self):
        p = lp_problem(Q=np.zeros((1, 1)), c=[0.5])
        s = Scenario(xi=np.array([5.0]), C=np.array([[1.0]]), weight=1.0)
        F = SaaFunction(p, [s])
        g1 = F.subgrad(np.array([0.5]))
        g2 = F.subgrad(np.array([0.8]))
        np.testing.assert_allclose(g1, g2)

    def test_full_support_matches_true_objective(self):
        rng = np.random.default_rng(7)
        p = complete_recourse_problem(rng)
        sup = enumerate_support(p)
        F = SaaFunction(p, sup)
        for _ in range(5):
            x = rng.normal(size=p.n1)
            assert abs(F.value(x) - true_objective(p, sup, x)) <= 1e-10 * (1 + abs(F.value(x)))

    def test_infeasible_scenario_reported_with_index(self):
        p = lp_problem()
        good = Scenario(xi=np.array([2.0]), C=np.array([[1.0]]), weight=0.5)
        bad = Scenario(xi=np.array([-5.0]), C=np.array([[0.0]]), weight=0.5)
        F = SaaFunction(p, [good, bad])
        with pytest.raises(RecourseInfeasible) as err:
            F.value(np.array([1.0]))
        assert err.value.scenario_index == 1

    def test_monotone_concentration_median(self):
        rng = np.random.default_rng(9)
        p = complete_recourse_problem(rng)
        sup = enumerate_support(p)
        x = np.array([0.4, 0.3, 0.3])
        exact = true_objective(p, sup, x)
        sizes = (8, 16, 32)
        med = []
        for n in sizes:
            errs = []
            for seed in range(50):
                scen = draw_scenarios(p, substream(seed, "sample"), n)
                errs.append(abs(SaaFunction(p, scen).value(x) - exact))
            med.append(np.median(errs))
        assert med[0] >= med[1] >= med[2]
