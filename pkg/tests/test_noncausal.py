import math

import numpy as np
import pytest
from hypothesis import given, settings

from bicausal import (
    NoContraction,
    NotTwoState,
    coupling_time_instance,
    noncausal_cost_series,
    two_state_closed_forms,
    validate_kernel,
    value_iterate,
)
from bicausal.noncausal import contracting_power
from conftest import kernels, random_positive_kernel

PERIODIC = [[0.0, 1.0], [1.0, 0.0]]


class TestSeries:
    def test_same_start_is_zero_after_one_term(self, worked_kernel):
        res = noncausal_cost_series(worked_kernel, 0, 0, beta=1.0)
        assert res.value == 0.0
        assert res.terms_used == 1
        assert res.tail_bound == 0.0

    def test_worked_undiscounted_geometric(self, worked_kernel):
        res = noncausal_cost_series(worked_kernel, 0, 1, beta=1.0, tol=1e-10)
        assert res.value == pytest.approx(10.0 / 3.0, abs=1e-9)

    def test_worked_discounted_geometric(self, worked_kernel):
        res = noncausal_cost_series(worked_kernel, 0, 1, beta=0.5, tol=1e-10)
        assert res.value == pytest.approx(1.0 / 0.65, abs=1e-9)

    def test_periodic_has_no_contraction(self):
        K = validate_kernel(PERIODIC)
        assert contracting_power(K) is None
        with pytest.raises(NoContraction):
            noncausal_cost_series(K, 0, 1, beta=1.0)

    def test_periodic_discounted_still_sums(self):
        # rows stay disjoint point masses, so every term is beta^k
        res = noncausal_cost_series(validate_kernel(PERIODIC), 0, 1, beta=0.5)
        assert res.value == pytest.approx(2.0, abs=1e-8)

    def test_tail_certificate(self, worked_kernel):
        loose = noncausal_cost_series(worked_kernel, 0, 1, beta=1.0, tol=1e-6)
        tight = noncausal_cost_series(worked_kernel, 0, 1, beta=1.0, tol=1e-7)
        assert abs(tight.value - loose.value) <= loose.tail_bound
        assert loose.value <= tight.value + 1e-15

    @settings(max_examples=20, deadline=None)
    @given(kernels(max_n=3))
    def test_certificate_brackets_refinement(self, K):
        loose = noncausal_cost_series(K, 0, 1, beta=1.0, tol=1e-5)
        tight = noncausal_cost_series(K, 0, 1, beta=1.0, tol=1e-6)
        assert loose.value <= tight.value + 1e-12
        assert tight.value <= loose.value + loose.tail_bound + 1e-12

    def test_lower_bound_on_adapted_cost(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            n = int(rng.integers(2, 5))
            K = random_positive_kernel(rng, n)
            W = value_iterate(coupling_time_instance(K, 0, 1), tol=1e-10).value_table
            for x in range(n):
                for xp in range(n):
                    res = noncausal_cost_series(K, x, xp, beta=1.0, tol=1e-9)
                    assert res.value <= W[x, xp] + 1e-8


class TestTwoStateForms:
    def test_worked_values(self, worked_kernel):
        forms = two_state_closed_forms(worked_kernel)
        assert forms.w_bc_formula == pytest.approx(10.0 / 3.0, abs=1e-12)
        assert forms.w_formula == pytest.approx(10.0 / 9.0, abs=1e-12)
        assert forms.w_formula_caveat is True

    def test_symmetric_kernel_red_flag(self):
        # the printed non-causal form vanishes although any coupling pays
        # at least 1 at step 0; the caveat flag stays set
        K = validate_kernel([[0.8, 0.2], [0.2, 0.8]])
        forms = two_state_closed_forms(K)
        assert forms.w_formula == 0.0
        assert forms.w_formula_caveat is True

    def test_formula_disagrees_with_series(self, worked_kernel):
        """Documented discrepancy: series gives 10/3, the printed form 10/9."""
        forms = two_state_closed_forms(worked_kernel)
        series = noncausal_cost_series(worked_kernel, 0, 1, beta=1.0)
        assert abs(series.value - forms.w_formula) > 2.0

    def test_adapted_form_matches_value_iteration_grid(self):
        for p in (0.1, 0.3, 0.45):
            for q in (0.05, 0.25, 0.4):
                K = validate_kernel([[1 - p, p], [q, 1 - q]])
                forms = two_state_closed_forms(K)
                W = value_iterate(coupling_time_instance(K, 0, 1), tol=1e-9).value_table
                assert W[0, 1] == pytest.approx(forms.w_bc_formula, abs=1e-6)

    def test_rejects_other_sizes(self):
        K = validate_kernel(np.full((3, 3), 1.0 / 3.0))
        with pytest.raises(NotTwoState):
            two_state_closed_forms(K)

    def test_permutation_kernel_goes_infinite(self):
        forms = two_state_closed_forms(validate_kernel(PERIODIC))
        assert math.isinf(forms.w_bc_formula)
