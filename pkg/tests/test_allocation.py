import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surveymech import (
    AllocationRule,
    CostSet,
    InvalidInputError,
    OutOfRangeError,
    expected_spend,
    extend,
    myerson_payments,
    solve_unbiased,
    virtual_costs,
    worst_case_variance,
)


def make_set(costs, cap=None):
    costs = np.asarray(costs, dtype=float)
    return CostSet(costs=costs, cap=float(costs.max() if cap is None else cap))


random_instance = st.tuples(
    st.lists(st.floats(min_value=0.0, max_value=30.0), min_size=1, max_size=40).map(sorted),
    st.floats(min_value=1e-3, max_value=2.0),
)


class TestSolveUnbiased:
    def test_saturation_equal_costs(self):
        rule = solve_unbiased(make_set([1, 1, 1, 1]), 4.0)
        assert rule.saturated
        assert np.allclose(rule.probabilities, 1.0)

    def test_water_filling_example(self):
        cs = make_set([1, 10, 11])
        rule = solve_unbiased(cs, 3.0)
        assert not rule.saturated
        assert np.allclose(rule.probabilities, [1 / 3, 1 / 12, 1 / 12])
        assert rule.lam == pytest.approx(1 / 3, rel=1e-12)
        assert np.dot(rule.probabilities, virtual_costs(cs)) == pytest.approx(3.0, rel=1e-12)

    def test_saturation_boundary(self):
        rule = solve_unbiased(make_set([1, 10, 11]), 33.0)
        assert rule.saturated
        assert np.allclose(rule.probabilities, 1.0)

    def test_rejects_nonpositive_budget(self):
        with pytest.raises(InvalidInputError):
            solve_unbiased(make_set([1.0]), 0.0)
        with pytest.raises(InvalidInputError):
            solve_unbiased(make_set([1.0]), -1.0)

    def test_rejects_nonfinite_budget(self):
        with pytest.raises(InvalidInputError):
            solve_unbiased(make_set([1.0]), float("nan"))

    def test_zero_costs_are_free(self):
        # psi = {0, 0, 6}: the paid entry carries the rent of the free prefix
        rule = solve_unbiased(make_set([0.0, 0.0, 2.0], cap=2.0), 0.5)
        assert rule.probabilities[0] == 1.0 and rule.probabilities[1] == 1.0
        assert rule.probabilities[2] == pytest.approx(0.5 / 6.0)

    @given(random_instance)
    @settings(max_examples=200, deadline=None)
    def test_budget_binding_and_monotone(self, instance):
        costs, frac = instance
        cs = make_set(costs, cap=31.0)
        psi = virtual_costs(cs)
        total = float(np.sum(psi))
        budget = frac * total
        if budget <= 0:
            return
        rule = solve_unbiased(cs, budget)
        probs = rule.probabilities
        assert np.all(np.diff(probs) <= 1e-12)
        assert np.all(probs > 0)
        spend = float(np.dot(probs, psi))
        if rule.saturated:
            assert total <= budget * (1 + 1e-12)
        else:
            assert abs(spend - budget) <= max(1e-9 * budget, 1e-12)


class TestMyersonPayments:
    def test_two_point(self):
        cs = make_set([1, 2])
        rule = AllocationRule(probabilities=np.array([1.0, 0.5]), lam=1.0)
        pay = myerson_payments(cs, rule)
        assert np.allclose(pay.payments, [1.5, 2.0])

    def test_constant_allocation_pays_top_cost(self):
        cs = make_set([1, 4, 9])
        rule = AllocationRule(probabilities=np.array([0.4, 0.4, 0.4]), lam=1.0)
        pay = myerson_payments(cs, rule)
        assert np.allclose(pay.payments, 9.0)

    def test_water_filling_payments(self):
        cs = make_set([1, 10, 11])
        rule = solve_unbiased(cs, 3.0)
        pay = myerson_payments(cs, rule)
        assert np.allclose(pay.payments, [3.5, 11.0, 11.0])

    def test_highest_cost_paid_its_cost(self):
        cs = make_set([2, 5, 7])
        rule = solve_unbiased(cs, 4.0)
        pay = myerson_payments(cs, rule)
        assert pay.payments[-1] == pytest.approx(7.0)

    def test_rejects_zero_allocation(self):
        cs = make_set([1, 2])
        rule = AllocationRule(probabilities=np.array([1.0, 0.0]), lam=1.0)
        with pytest.raises(InvalidInputError):
            myerson_payments(cs, rule)

    @given(random_instance)
    @settings(max_examples=150, deadline=None)
    def test_payment_identity(self, instance):
        costs, frac = instance
        cs = make_set(costs, cap=31.0)
        psi = virtual_costs(cs)
        budget = frac * float(np.sum(psi))
        if budget <= 0:
            return
        rule = solve_unbiased(cs, budget)
        pay = myerson_payments(cs, rule)
        lhs = float(np.dot(rule.probabilities, pay.payments))
        rhs = float(np.dot(rule.probabilities, psi))
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)
        # individual rationality
        assert np.all(pay.payments >= cs.costs - 1e-12)


class TestExtend:
    def setup_method(self):
        self.cs = make_set([1, 10])
        self.rule = AllocationRule(probabilities=np.array([1.0, 0.2]), lam=1.0)
        self.pay = myerson_payments(self.cs, self.rule)

    def test_grid_point_maps_to_itself(self):
        assert extend(self.cs, self.rule, self.pay, 1.0) == (1.0, pytest.approx(2.8))

    def test_interior_query_ceils(self):
        assert extend(self.cs, self.rule, self.pay, 5.0) == (0.2, 10.0)

    def test_above_cap_declines(self):
        with pytest.raises(OutOfRangeError):
            extend(self.cs, self.rule, self.pay, 10.5)

    def test_zero_cost_query(self):
        a, p = extend(self.cs, self.rule, self.pay, 0.0)
        assert (a, p) == (1.0, pytest.approx(2.8))

    def test_negative_query_rejected(self):
        with pytest.raises(InvalidInputError):
            extend(self.cs, self.rule, self.pay, -0.1)


class TestWorstCaseVariance:
    def test_full_collection_zero(self):
        cs = make_set([1, 1, 1])
        rule = AllocationRule(probabilities=np.ones(3), lam=2.0, saturated=True)
        assert worst_case_variance(rule, cs) == 0.0

    def test_half_collection(self):
        cs = make_set(np.ones(10))
        rule = AllocationRule(probabilities=np.full(10, 0.5), lam=1.0)
        assert worst_case_variance(rule, cs) == pytest.approx(0.1)

    def test_water_filling_variance(self):
        cs = make_set([1, 10, 11])
        rule = solve_unbiased(cs, 3.0)
        assert worst_case_variance(rule, cs) == pytest.approx(8 / 3)

    def test_zero_allocation_is_infinite(self):
        cs = make_set([1, 2])
        rule = AllocationRule.__new__(AllocationRule)
        object.__setattr__(rule, "probabilities", np.array([1.0, 0.0]))
        object.__setattr__(rule, "lam", 0.0)
        object.__setattr__(rule, "saturated", False)
        assert worst_case_variance(rule, cs) == float("inf")


class TestExpectedSpend:
    def test_water_filling_spend(self):
        cs = make_set([1, 10, 11])
        rule = solve_unbiased(cs, 3.0)
        pay = myerson_payments(cs, rule)
        assert expected_spend(rule, pay, cs) == pytest.approx(1.0)

    def test_saturated_spend(self):
        cs = make_set([1, 1, 1, 1])
        rule = solve_unbiased(cs, 4.0)
        pay = myerson_payments(cs, rule)
        assert expected_spend(rule, pay, cs) == pytest.approx(1.0)

    def test_constant_allocation(self):
        cs = make_set([1, 4, 9])
        rule = AllocationRule(probabilities=np.full(3, 0.25), lam=1.0)
        pay = myerson_payments(cs, rule)
        assert expected_spend(rule, pay, cs) == pytest.approx(0.25 * 9.0)

    def test_rejects_misaligned(self):
        cs = make_set([1, 4, 9])
        rule = solve_unbiased(cs, 3.0)
        pay = myerson_payments(cs, rule)
        with pytest.raises(InvalidInputError):
            expected_spend(rule, pay, make_set([1, 4]))
