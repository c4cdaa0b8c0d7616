import numpy as np
import pytest
from hypothesis import given, settings

from bicausal import (
    check_sticky,
    classic_coupling,
    discrete_metric,
    independent_coupling,
    solve_transport,
    tv_distance,
    validate_coupling,
    validate_kernel,
    wasserstein_coupling,
)
from conftest import kernel_pairs, kernels


class TestClassicCoupling:
    def test_offdiagonal_product(self, worked_kernel):
        Q = classic_coupling(worked_kernel)
        assert Q.plans[0, 1, 0, 0] == pytest.approx(0.9 * 0.2, abs=1e-15)

    def test_diagonal_pairs_move_together(self, worked_kernel):
        Q = classic_coupling(worked_kernel)
        for x in range(2):
            off = Q.plans[x, x][~np.eye(2, dtype=bool)]
            assert (off == 0).all()

    @settings(max_examples=30, deadline=None)
    @given(kernels())
    def test_valid_and_sticky(self, K):
        Q = classic_coupling(K)
        assert validate_coupling(Q, K, K, tol=1e-9)
        assert check_sticky(Q, K, tol=1e-12)


class TestIndependentCoupling:
    def test_product_entry(self, worked_kernel):
        Q = independent_coupling(worked_kernel, worked_kernel)
        assert Q.plans[0, 1, 1, 1] == pytest.approx(0.1 * 0.8, abs=1e-15)

    def test_point_mass_rows(self):
        K = validate_kernel([[0.0, 1.0], [1.0, 0.0]])
        Q = independent_coupling(K, K)
        assert Q.plans[0, 1, 1, 0] == 1.0

    def test_not_sticky_for_random_rows(self, worked_kernel):
        assert not check_sticky(independent_coupling(worked_kernel, worked_kernel), worked_kernel)

    def test_sticky_for_deterministic_rows(self):
        K = validate_kernel([[0.0, 1.0], [1.0, 0.0]])
        assert check_sticky(independent_coupling(K, K), K)

    @settings(max_examples=30, deadline=None)
    @given(kernel_pairs())
    def test_exact_marginals(self, pair):
        P, Pp = pair
        assert validate_coupling(independent_coupling(P, Pp), P, Pp, tol=1e-12)


class TestWassersteinCoupling:
    def test_worked_five_cases(self, worked_kernel):
        Q = wasserstein_coupling(worked_kernel, worked_kernel)
        plan = Q.plans[0, 1]
        assert plan[0, 0] == pytest.approx(0.2, abs=1e-12)
        assert plan[1, 1] == pytest.approx(0.1, abs=1e-12)
        assert plan[0, 1] == pytest.approx(0.7, abs=1e-12)
        assert plan[1, 0] == pytest.approx(0.0, abs=1e-12)

    def test_equal_rows_land_on_diagonal(self):
        K = validate_kernel([[0.5, 0.5], [0.5, 0.5]])
        Q = wasserstein_coupling(K, K)
        off = Q.plans[0, 1][~np.eye(2, dtype=bool)]
        assert (off == 0).all()

    def test_diagonal_pairs_glued(self, worked_kernel):
        Q = wasserstein_coupling(worked_kernel, worked_kernel)
        np.testing.assert_allclose(Q.plans[1, 1], np.diag([0.2, 0.8]), atol=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(kernel_pairs())
    def test_valid_on_kernel_pairs(self, pair):
        P, Pp = pair
        assert validate_coupling(wasserstein_coupling(P, Pp), P, Pp, tol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(kernels())
    def test_maximizes_one_step_diagonal_mass(self, K):
        """Diagonal mass is 1 - TV per pair, the best any coupling can do."""
        Q = wasserstein_coupling(K, K)
        n = K.n
        metric = discrete_metric(n)
        for x in range(n):
            for xp in range(n):
                diag_mass = float(np.trace(Q.plans[x, xp]))
                tv = tv_distance(K.rows[x], K.rows[xp])
                assert diag_mass == pytest.approx(1.0 - tv, abs=1e-9)
                best_off = solve_transport(K.rows[x], K.rows[xp], metric).value
                assert 1.0 - best_off <= diag_mass + 1e-9

    @settings(max_examples=30, deadline=None)
    @given(kernels())
    def test_sticky(self, K):
        assert check_sticky(wasserstein_coupling(K, K), K, tol=1e-12)


class TestValidateCoupling:
    def test_perturbed_cell_fails(self, worked_kernel):
        Q = classic_coupling(worked_kernel)
        plans = Q.plans.copy()
        plans[0, 1, 0, 0] += 1e-3
        from bicausal import CouplingKernel

        assert not validate_coupling(CouplingKernel(plans), worked_kernel, worked_kernel, 1e-9)

    def test_wrong_kernel_fails(self, worked_kernel):
        other = validate_kernel([[0.5, 0.5], [0.5, 0.5]])
        Q = classic_coupling(worked_kernel)
        assert not validate_coupling(Q, other, other, tol=1e-9)
