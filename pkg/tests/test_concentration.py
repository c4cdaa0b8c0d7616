import math

import numpy as np
import pytest

from bicausal import (
    BoundRequest,
    InfiniteProxy,
    NoContraction,
    NotCouplingInstance,
    ProblemSpec,
    coupling_time_instance,
    discrete_metric,
    mcdiarmid_bound,
    validate_kernel,
    variance_proxy,
)
from conftest import random_positive_kernel

# independent arithmetic for the worked bound: exponent is
# -2 * 20^2 / (100 * (10/3)^2) = -0.72
WORKED_BOUND = 2.0 * math.exp(-0.72)


@pytest.fixture
def worked_spec(worked_kernel):
    return coupling_time_instance(worked_kernel, 0, 1)


class TestVarianceProxy:
    def test_doeblin_worked(self, worked_spec):
        assert variance_proxy(worked_spec, "doeblin") == pytest.approx(10.0 / 3.0, abs=1e-12)

    def test_dp_matches_doeblin_on_two_states(self, worked_spec):
        dp = variance_proxy(worked_spec, "bicausal_dp")
        assert dp == pytest.approx(10.0 / 3.0, abs=1e-6)

    def test_series_worked(self, worked_spec):
        assert variance_proxy(worked_spec, "noncausal_series") == pytest.approx(
            10.0 / 3.0, abs=1e-6
        )

    def test_rank_one_kernel_couples_in_one_step(self):
        K = validate_kernel([[0.3, 0.7], [0.3, 0.7]])
        spec = coupling_time_instance(K, 0, 1)
        assert variance_proxy(spec, "doeblin") == pytest.approx(1.0, abs=1e-12)

    def test_doeblin_requires_contraction(self):
        spec = coupling_time_instance(validate_kernel(np.eye(2)), 0, 1)
        with pytest.raises(NoContraction):
            variance_proxy(spec, "doeblin")

    def test_series_requires_coupling_instance(self, worked_kernel):
        spec = ProblemSpec(worked_kernel, worked_kernel, 0, 1, discrete_metric(2), beta=0.5)
        with pytest.raises(NotCouplingInstance):
            variance_proxy(spec, "noncausal_series")

    def test_ordering_chain(self):
        rng = np.random.default_rng(12)
        for _ in range(8):
            n = int(rng.integers(2, 4))
            spec = coupling_time_instance(random_positive_kernel(rng, n), 0, n - 1)
            series = variance_proxy(spec, "noncausal_series")
            dp = variance_proxy(spec, "bicausal_dp")
            doeblin = variance_proxy(spec, "doeblin")
            # equality is attained (two states), so allow solver-scale slack
            assert series <= dp + 1e-6
            assert dp <= doeblin + 1e-8


class TestMcdiarmidBound:
    def test_worked_value(self):
        got = mcdiarmid_bound(BoundRequest(n=100, t=20.0), 10.0 / 3.0)
        assert got == pytest.approx(WORKED_BOUND, abs=1e-12)

    def test_tiny_deviation_is_vacuous(self):
        assert mcdiarmid_bound(BoundRequest(n=10, t=1e-12), 1.0) == pytest.approx(2.0, abs=1e-9)

    def test_never_exceeds_two_and_vanishes(self):
        assert mcdiarmid_bound(BoundRequest(n=1, t=1e-6), 5.0) <= 2.0
        assert mcdiarmid_bound(BoundRequest(n=1, t=1e6), 1.0) == pytest.approx(0.0, abs=1e-300)

    def test_monotone_in_deviation(self):
        bounds = [mcdiarmid_bound(BoundRequest(n=50, t=t), 2.0) for t in (1.0, 2.0, 4.0, 8.0)]
        assert all(a > b for a, b in zip(bounds, bounds[1:]))

    def test_monotone_in_proxy(self):
        small = mcdiarmid_bound(BoundRequest(n=50, t=5.0), 1.0)
        large = mcdiarmid_bound(BoundRequest(n=50, t=5.0), 2.0)
        assert small < large

    def test_halving_proxy_strictly_tightens(self):
        full = mcdiarmid_bound(BoundRequest(n=100, t=10.0), 4.0)
        half = mcdiarmid_bound(BoundRequest(n=100, t=10.0), 2.0)
        assert half < full

    def test_infinite_proxy_rejected(self):
        with pytest.raises(InfiniteProxy):
            mcdiarmid_bound(BoundRequest(n=10, t=1.0), math.inf)

    def test_nonpositive_inputs_rejected(self):
        with pytest.raises(ValueError):
            BoundRequest(n=10, t=0.0)
        with pytest.raises(ValueError):
            BoundRequest(n=0, t=1.0)
        with pytest.raises(ValueError):
            mcdiarmid_bound(BoundRequest(n=10, t=1.0), 0.0)
