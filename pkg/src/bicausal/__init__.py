"""Bicausal (adapted) optimal transport between finite-state Markov chains.

Core entry points: :func:`value_iterate` computes the adapted transport
cost table by exact value iteration, :func:`extract_greedy_coupling` turns
the fixed point into an optimal Markovian coupling, and the ``couplings``,
``noncausal``, ``concentration`` and ``simulate`` modules cover the named
couplings, the maximal-coupling series, bounded-differences bounds and
Monte Carlo cross-checks. The ``bicausal`` console script wraps it all for
batch use.
"""

from .chain import (
    ChainSpec,
    StateSpace,
    TransitionKernel,
    doeblin_coefficient,
    k_step_distribution,
    structure_flags,
    tv_distance,
    validate_distribution,
    validate_kernel,
)
from .concentration import BoundRequest, mcdiarmid_bound, variance_proxy
from .couplings import (
    CouplingKernel,
    check_sticky,
    classic_coupling,
    independent_coupling,
    validate_coupling,
    wasserstein_coupling,
)
from .dp import (
    FixedPointReport,
    ProblemSpec,
    SolveReport,
    apply_bellman,
    apply_policy_operator,
    coupling_time_instance,
    discrete_metric,
    evaluate_policy,
    extract_greedy_coupling,
    value_iterate,
    verify_fixed_point,
    verify_optimal_coupling,
)
from .errors import (
    BicausalError,
    DimensionMismatch,
    InfeasibleMarginals,
    InfiniteProxy,
    InvalidCoupling,
    NegativeEntry,
    NoContraction,
    NonSquare,
    NotCouplingInstance,
    NotTwoState,
    RowSumViolation,
    SingularSystem,
    TooLarge,
    TruncationUnsafe,
)
from .exact_ot import (
    TransportPlan,
    TransportSolution,
    brute_force_transport,
    min_infinite_mass,
    solve_transport,
)
from .noncausal import (
    SeriesResult,
    TwoStateForms,
    W_FORMULA_CAVEAT,
    noncausal_cost_series,
    two_state_closed_forms,
)
from .simulate import (
    CouplingTimeStats,
    DiscountedCostEstimate,
    SimulationConfig,
    estimate_coupling_time,
    estimate_discounted_cost,
    sample_coupled_trajectory,
    trajectory_key,
)

__version__ = "0.1.0"

__all__ = [
    "BicausalError",
    "BoundRequest",
    "ChainSpec",
    "CouplingKernel",
    "CouplingTimeStats",
    "DimensionMismatch",
    "DiscountedCostEstimate",
    "FixedPointReport",
    "InfeasibleMarginals",
    "InfiniteProxy",
    "InvalidCoupling",
    "NegativeEntry",
    "NoContraction",
    "NonSquare",
    "NotCouplingInstance",
    "NotTwoState",
    "ProblemSpec",
    "RowSumViolation",
    "SeriesResult",
    "SimulationConfig",
    "SingularSystem",
    "SolveReport",
    "StateSpace",
    "TooLarge",
    "TransitionKernel",
    "TransportPlan",
    "TransportSolution",
    "TruncationUnsafe",
    "TwoStateForms",
    "W_FORMULA_CAVEAT",
    "apply_bellman",
    "apply_policy_operator",
    "brute_force_transport",
    "check_sticky",
    "classic_coupling",
    "coupling_time_instance",
    "discrete_metric",
    "doeblin_coefficient",
    "estimate_coupling_time",
    "estimate_discounted_cost",
    "evaluate_policy",
    "extract_greedy_coupling",
    "independent_coupling",
    "k_step_distribution",
    "mcdiarmid_bound",
    "min_infinite_mass",
    "noncausal_cost_series",
    "sample_coupled_trajectory",
    "solve_transport",
    "structure_flags",
    "trajectory_key",
    "tv_distance",
    "two_state_closed_forms",
    "validate_coupling",
    "validate_distribution",
    "validate_kernel",
    "value_iterate",
    "variance_proxy",
    "verify_fixed_point",
    "verify_optimal_coupling",
    "wasserstein_coupling",
]
