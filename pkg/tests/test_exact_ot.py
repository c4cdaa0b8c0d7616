import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicausal import (
    DimensionMismatch,
    InfeasibleMarginals,
    NegativeEntry,
    TooLarge,
    brute_force_transport,
    min_infinite_mass,
    solve_transport,
    tv_distance,
)
from conftest import distributions

INF = math.inf
DISCRETE2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def random_instance(rng, n, with_inf):
    """A random transport instance; the oracle fixes the expected value."""
    p = rng.dirichlet(np.ones(n))
    q = rng.dirichlet(np.ones(n))
    cost = rng.uniform(0.0, 10.0, size=(n, n))
    if with_inf:
        mask = rng.random((n, n)) < 0.3
        cost[mask] = INF
    return p, q, cost


class TestSolveTransport:
    def test_point_masses_force_the_plan(self):
        sol = solve_transport([1.0, 0.0], [0.0, 1.0], DISCRETE2)
        assert sol.value == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(sol.plan.mass, [[0.0, 1.0], [0.0, 0.0]], atol=1e-15)

    def test_equal_marginals_zero_diagonal(self):
        sol = solve_transport([0.5, 0.5], [0.5, 0.5], DISCRETE2)
        assert sol.value == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(sol.plan.mass, np.diag([0.5, 0.5]), atol=1e-15)

    def test_worked_value_equals_tv(self):
        sol = solve_transport([0.9, 0.1], [0.2, 0.8], DISCRETE2)
        assert sol.value == pytest.approx(0.7, abs=1e-12)
        assert sol.value == pytest.approx(
            brute_force_transport([0.9, 0.1], [0.2, 0.8], DISCRETE2), abs=1e-12
        )

    def test_deterministic_output(self):
        rng = np.random.default_rng(3)
        p, q, cost = random_instance(rng, 4, with_inf=False)
        first = solve_transport(p, q, cost)
        again = solve_transport(p, q, cost)
        assert first.value == again.value
        assert np.array_equal(first.plan.mass, again.plan.mass)

    def test_all_infinite_costs(self):
        sol = solve_transport([1.0, 0.0], [0.0, 1.0], np.full((2, 2), INF))
        assert sol.value == INF

    def test_forced_infinite_cell(self):
        cost = np.array([[0.0, INF], [1.0, 0.0]])
        sol = solve_transport([1.0, 0.0], [0.0, 1.0], cost)
        assert sol.value == INF
        # the reported plan minimizes the forbidden mass (here it is forced)
        assert sol.plan.mass[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_avoidable_infinite_cells_stay_empty(self):
        cost = np.array([[INF, 1.0], [1.0, INF]])
        sol = solve_transport([0.5, 0.5], [0.5, 0.5], cost)
        assert sol.value == pytest.approx(1.0, abs=1e-12)
        assert sol.plan.mass[0, 0] == 0.0 and sol.plan.mass[1, 1] == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve_transport([1.0], [0.5, 0.5], DISCRETE2)

    def test_infeasible_marginals(self):
        with pytest.raises(InfeasibleMarginals):
            solve_transport([0.6, 0.6], [0.5, 0.5], DISCRETE2)

    def test_negative_cost_rejected(self):
        with pytest.raises(NegativeEntry):
            solve_transport([0.5, 0.5], [0.5, 0.5], [[-1.0, 0.0], [0.0, 0.0]])

    def test_zero_probability_states_carried(self):
        sol = solve_transport([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], np.ones((3, 3)))
        assert sol.plan.mass.shape == (3, 3)
        assert sol.plan.marginal_error() <= 1e-12

    @settings(max_examples=60, deadline=None)
    @given(distributions(n=3), distributions(n=3))
    def test_plan_feasibility_and_tv_identity(self, p, q):
        discrete = 1.0 - np.eye(3)
        sol = solve_transport(p, q, discrete)
        assert sol.plan.marginal_error() <= 1e-9
        assert (sol.plan.mass >= 0).all()
        assert sol.value == pytest.approx(tv_distance(p, q), abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(distributions(n=3), distributions(n=3), st.floats(0.1, 50.0))
    def test_cost_scaling(self, p, q, lam):
        rng = np.random.default_rng(7)
        cost = rng.uniform(0.0, 5.0, (3, 3))
        base = solve_transport(p, q, cost)
        scaled = solve_transport(p, q, lam * cost)
        assert scaled.value == pytest.approx(lam * base.value, rel=1e-9, abs=1e-9)
        # the plan found for cost stays optimal for the scaled cost
        assert float((base.plan.mass * lam * cost).sum()) == pytest.approx(
            scaled.value, rel=1e-9, abs=1e-9
        )

    @settings(max_examples=40, deadline=None)
    @given(distributions(n=4), distributions(n=4))
    def test_independent_plan_upper_bound(self, p, q):
        rng = np.random.default_rng(11)
        cost = rng.uniform(0.0, 5.0, (4, 4))
        sol = solve_transport(p, q, cost)
        assert sol.value <= float((np.outer(p, q) * cost).sum()) + 1e-9


class TestBruteForce:
    def test_point_mass_zero_cost(self):
        cost = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        assert brute_force_transport([1, 0, 0], [1, 0, 0], cost) == pytest.approx(0.0)

    def test_all_infinite(self):
        assert brute_force_transport([0.5, 0.5], [0.5, 0.5], np.full((2, 2), INF)) == INF

    def test_too_large(self):
        with pytest.raises(TooLarge):
            brute_force_transport(np.full(7, 1 / 7), np.full(7, 1 / 7), np.ones((7, 7)))

    def test_oracle_agreement_including_infinite_cells(self):
        rng = np.random.default_rng(20260810)
        for trial in range(200):
            n = int(rng.integers(2, 5))
            p, q, cost = random_instance(rng, n, with_inf=trial % 4 == 0)
            expected = brute_force_transport(p, q, cost)
            got = solve_transport(p, q, cost).value
            if math.isinf(expected):
                assert math.isinf(got), (trial, cost)
            else:
                assert got == pytest.approx(expected, abs=1e-9), (trial, cost)

    def test_five_states_once(self):
        rng = np.random.default_rng(5)
        p, q, cost = random_instance(rng, 5, with_inf=False)
        assert solve_transport(p, q, cost).value == pytest.approx(
            brute_force_transport(p, q, cost), abs=1e-9
        )


class TestMinInfiniteMass:
    def test_all_finite_mask(self):
        assert min_infinite_mass([0.5, 0.5], [0.5, 0.5], np.ones((2, 2), bool)) == 0.0

    def test_everything_forced_out(self):
        mask = np.eye(2, dtype=bool)
        assert min_infinite_mass([1.0, 0.0], [0.0, 1.0], mask) == pytest.approx(1.0)

    def test_antidiagonal_feasible(self):
        mask = ~np.eye(2, dtype=bool)
        assert min_infinite_mass([0.5, 0.5], [0.5, 0.5], mask) == pytest.approx(0.0)
        # cross-check through the brute-force oracle with 0/1 costs
        cost = np.where(mask, 0.0, INF)
        assert brute_force_transport([0.5, 0.5], [0.5, 0.5], cost) == pytest.approx(0.0)

    def test_partial_forcing(self):
        # row 0 must send 0.7 but only 0.4 of finite capacity is reachable
        mask = np.array([[True, False], [True, True]])
        got = min_infinite_mass([0.7, 0.3], [0.4, 0.6], mask)
        assert got == pytest.approx(0.3, abs=1e-12)
