import io
import math

import numpy as np
import pytest

from surveymech import (
    CostSet,
    InvalidInputError,
    Population,
    benchmark_ci,
    benchmark_unbiased,
    ci_schedule,
    gen_population,
    run_ci_online,
    run_summary_json,
    run_unbiased_online,
    solve_unbiased,
    transcripts_to_csv,
    unbiased_schedule,
    virtual_costs,
    worst_case_variance,
)


def make_pop(costs, data=None, cap=None):
    costs = np.asarray(costs, dtype=float)
    data = np.ones_like(costs) if data is None else np.asarray(data, dtype=float)
    cap = float(costs.max() if cap is None else cap)
    return Population(costs=costs, data=data, cap=cap)


class TestSchedules:
    def test_unbiased_xi(self):
        sched = unbiased_schedule(64, 10.0)
        assert sched.xi == pytest.approx(1 / 32)
        assert sched.per_round(4) == pytest.approx(10.0 * 2 / 32)

    def test_ci_xi(self):
        sched = ci_schedule(64, 10.0)
        assert sched.xi == pytest.approx(1 / 128)

    def test_rejects_bad_n(self):
        with pytest.raises(InvalidInputError):
            unbiased_schedule(0, 1.0)


class TestRunUnbiased:
    def test_saturating_budget_recovers_exact_mean(self):
        pop = make_pop([1, 2, 3, 2], data=[0.1, 0.2, 0.9, 0.4], cap=3.0)
        n = pop.n
        # every round's grid spend is at most sum(psi) of the cap-augmented
        # set, so a budget of 4*sqrt(n)*that saturates every round
        worst = float(np.sum(virtual_costs(CostSet(costs=np.full(n, 3.0), cap=3.0))))
        sched = unbiased_schedule(n, 4 * math.sqrt(n) * worst)
        res = run_unbiased_online(pop, sched, rng_seed=0)
        assert res.estimate == pytest.approx(pop.mean)
        assert all(t.alloc == 1.0 for t in res.transcripts)

    def test_single_agent_round_budget(self):
        pop = make_pop([2.0], cap=10.0)
        sched = unbiased_schedule(1, 4.0)
        res = run_unbiased_online(pop, sched, rng_seed=1)
        t = res.transcripts[0]
        assert t.grid == (10.0,)
        # round budget is xi*B*sqrt(1) = 1.0; psi on {cap} is cap
        assert t.alloc == pytest.approx(min(1.0, 1.0 / 10.0))

    def test_determinism(self):
        pop = make_pop([1, 5, 2, 4, 3], cap=6.0)
        sched = unbiased_schedule(5, 3.0)
        a = run_unbiased_online(pop, sched, rng_seed=123)
        b = run_unbiased_online(pop, sched, rng_seed=123)
        assert a.estimate == b.estimate
        assert a.transcripts == b.transcripts

    def test_zero_budget_rejected(self):
        pop = make_pop([1.0, 2.0], cap=3.0)
        sched = unbiased_schedule(2, 0.0)
        with pytest.raises(InvalidInputError):
            run_unbiased_online(pop, sched, rng_seed=0)

    def test_flagged_report_above_cap(self):
        pop = Population(costs=np.array([1.0, 2.0]), data=np.ones(2), cap=5.0)
        sched = unbiased_schedule(2, 10.0)
        res = run_unbiased_online(pop, sched, rng_seed=0, cap=1.5)
        assert res.flagged == 1
        flagged = [t for t in res.transcripts if t.flagged]
        assert len(flagged) == 1 and flagged[0].y == 0.0 and not flagged[0].purchased

    def test_transcript_reweighting(self):
        pop = make_pop([1, 2, 3], cap=4.0)
        sched = unbiased_schedule(3, 5.0)
        res = run_unbiased_online(pop, sched, rng_seed=7)
        for t in res.transcripts:
            if t.purchased:
                assert t.y == pytest.approx(t.observed / t.alloc)
                assert t.paid >= t.cost
            else:
                assert t.y == 0.0 and t.paid == 0.0


class TestRunCI:
    def test_zero_budget_gives_unit_interval(self):
        pop = make_pop([1, 2, 3, 4], cap=5.0)
        sched = ci_schedule(4, 0.0)
        res = run_ci_online(pop, sched, 0.5, rng_seed=0)
        assert res.ignored_count == 4
        assert (res.interval.lower, res.interval.upper) == (0.0, 1.0)

    def test_huge_budget_buys_every_offer(self):
        pop = make_pop([1, 1, 2, 2], data=[0.3, 0.6, 0.2, 0.9], cap=2.0)
        n = pop.n
        worst = float(np.sum(virtual_costs(CostSet(costs=np.full(n, 2.0), cap=2.0))))
        sched = ci_schedule(n, 16 * math.sqrt(n) * worst * 1e6)
        res = run_ci_online(pop, sched, 0.9, rng_seed=3)
        for t in res.transcripts:
            if not t.ignored:
                assert t.alloc == 1.0 and t.purchased
        assert res.interval.bias_term == pytest.approx(res.ignored_count / n)

    def test_determinism(self):
        pop = make_pop([1, 5, 2, 4, 3, 2, 2, 1], cap=6.0)
        sched = ci_schedule(8, 20.0)
        a = run_ci_online(pop, sched, 0.9, rng_seed=11)
        b = run_ci_online(pop, sched, 0.9, rng_seed=11)
        assert a.interval == b.interval
        buf_a, buf_b = io.StringIO(), io.StringIO()
        transcripts_to_csv(a.transcripts, buf_a)
        transcripts_to_csv(b.transcripts, buf_b)
        assert buf_a.getvalue() == buf_b.getvalue()

    def test_ignored_rounds_pay_nothing(self):
        pop = make_pop([1, 1, 9, 9, 9, 1], cap=9.0)
        sched = ci_schedule(6, 3.0)
        res = run_ci_online(pop, sched, 0.9, rng_seed=2)
        for t in res.transcripts:
            if t.ignored:
                assert t.paid == 0.0 and not t.purchased and t.y == 0.0


class TestBenchmarks:
    def test_free_data(self):
        rule, var = benchmark_unbiased(np.zeros(3), 0.0, 1.0)
        assert np.allclose(rule.probabilities, 1.0)
        assert var == 0.0

    def test_augmented_anchor(self):
        rule, var = benchmark_unbiased(np.array([1.0, 10.0]), 11.0, 3.0)
        assert np.allclose(rule.probabilities, [1 / 3, 1 / 12, 1 / 12])
        assert var == pytest.approx(8 / 3)

    def test_saturated_variance_zero(self):
        rule, var = benchmark_unbiased(np.array([1.0, 10.0]), 11.0, 33.0)
        assert var == 0.0
        assert rule.saturated

    def test_ci_zero_budget_length_one(self):
        (_, ignore), l_star = benchmark_ci(np.array([1.0, 2.0]), 3.0, 0.0, 0.1)
        assert np.allclose(ignore.u_values, 1.0)
        assert l_star == pytest.approx(1.0)

    def test_ci_huge_budget_saturates(self):
        costs = np.full(80, 1.0)
        (rule, ignore), l_star = benchmark_ci(costs, 1.0, 1e9, 0.9)
        m = costs.size + 1
        from surveymech import alpha_gamma

        beta = 2 * alpha_gamma(0.9) / math.sqrt(m)
        assert rule.saturated
        assert np.allclose(rule.probabilities, 1.0)
        # within sqrt(2) of the best length achievable at unit allocation
        q = np.linspace(0.0, 1.0, 100001)
        best = float(np.min(np.sqrt(beta**2 * (1 - q) + q**2) * math.sqrt(2)))
        assert l_star <= best + 1e-6
        # the quadratic surrogate puts the ignore mass near beta^2 * m / 2
        assert ignore.total_mass == pytest.approx(min(m, beta**2 * m / 2), rel=1e-6)

    def test_ci_matches_grid_oracle(self):
        from surveymech import alpha_gamma, grid_search_ci

        costs = np.array([1.0, 1.0, 100.0])
        cap = 100.0
        (_, _), l_star = benchmark_ci(costs, cap, 2.0, 0.1)
        aug = CostSet(costs=np.append(costs, cap), cap=cap)
        beta = 2 * alpha_gamma(0.1) / 2.0
        (_, _), grid_obj = grid_search_ci(aug, 2.0, beta)
        # squared objective sandwich: l_star in [sqrt(obj), sqrt(2 obj)]
        assert math.sqrt(grid_obj) - 1e-3 <= l_star <= math.sqrt(2 * grid_obj) + 1e-3


class TestPerRoundTruthfulness:
    def test_unbiased_round_mechanisms_pass_audit(self):
        from surveymech import truthfulness_audit
        from surveymech.online_runner import _unbiased_round

        pop = make_pop([1, 5, 2, 4, 3, 2.5, 1.5], cap=6.0)
        sched = unbiased_schedule(7, 12.0)
        res = run_unbiased_online(pop, sched, rng_seed=5)
        for t in res.transcripts:
            grid, alloc, payments = _unbiased_round(t.grid, sched.per_round(t.round_index))
            rep = truthfulness_audit(grid, alloc, payments, cap=float(grid[-1]))
            assert rep.passed, (t.round_index, rep)

    def test_ci_round_effective_mechanisms_pass_audit(self):
        from surveymech import alpha_gamma, truthfulness_audit
        from surveymech.online_runner import _ci_round

        pop = make_pop([1, 1, 9, 2, 9, 1.5, 8, 3], cap=9.0)
        n = pop.n
        sched = ci_schedule(n, 10.0)
        beta = 2 * alpha_gamma(0.9) / math.sqrt(n)
        res = run_ci_online(pop, sched, 0.9, rng_seed=5)
        for t in res.transcripts:
            grid, alloc, ignored, payments = _ci_round(
                t.grid, sched.per_round(t.round_index), beta
            )
            effective = np.where(ignored, 0.0, alloc)
            rep = truthfulness_audit(grid, effective, payments, cap=float(grid[-1]))
            assert rep.passed, (t.round_index, rep)


class TestExports:
    def test_transcript_csv_shape(self):
        pop = make_pop([1, 2], cap=3.0)
        sched = unbiased_schedule(2, 2.0)
        res = run_unbiased_online(pop, sched, rng_seed=0)
        buf = io.StringIO()
        transcripts_to_csv(res.transcripts, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "i,cost,A,P,ignored,purchased,y,paid"
        assert len(lines) == 3

    def test_run_summary_json(self):
        pop = make_pop([1, 2], cap=3.0)
        sched = unbiased_schedule(2, 2.0)
        res = run_unbiased_online(pop, sched, rng_seed=0)
        text = run_summary_json(res)
        assert '"task": "unbiased"' in text
