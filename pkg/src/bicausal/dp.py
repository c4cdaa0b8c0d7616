"""Value iteration for the adapted transport cost between two Markov chains.

The problem is an infinite-horizon Markov decision process on state pairs
(x, x'): the action set at a pair is the transport polytope between
P(x, .) and P'(x', .), the next pair is drawn from the chosen plan, and the
stage cost is c(x, x') discounted by beta. The Bellman operator is

    T(V)(x, x') = c(x, x') + beta * min_{a in U(x,x')} <a, V>,

whose inner minimization is solved exactly by :mod:`bicausal.exact_ot`.
Value iteration starts from the zero table; for beta < 1 it converges at a
linear rate, for beta = 1 it increases monotonically to the optimal cost.
Value tables are plain (n, n) float arrays; +inf entries are allowed and
propagate through the two-phase inner solver.

Everything here is a pure function of immutable inputs; a Bellman sweep is a
Jacobi update (all pairs read the previous table), so sweeps parallelize
over state pairs without coordination.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chain import TransitionKernel
from .couplings import CouplingKernel, check_sticky, validate_coupling
from .errors import DimensionMismatch, InvalidCoupling, NegativeEntry, SingularSystem
from .exact_ot import MASS_EPS, _transport_core, solve_transport

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
_DIVERGENCE_FACTOR = 1e6
_DIRECT_SOLVE_LIMIT = 4096


def discrete_metric(n: int) -> np.ndarray:
    """0-1 cost table: free on the diagonal, one elsewhere."""
    c = 1.0 - np.eye(n)
    c.flags.writeable = False
    return c


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance: two kernels, initial states, stage cost and discount."""

    P: TransitionKernel
    P_prime: TransitionKernel
    x0: int
    x0_prime: int
    stage_cost: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        n = self.P.n
        if self.P_prime.n != n:
            raise DimensionMismatch("kernels live on different state spaces")
        cost = np.asarray(self.stage_cost, dtype=float)
        if cost.shape != (n, n):
            raise DimensionMismatch(f"stage cost must be {n}x{n}, got {cost.shape}")
        if not np.isfinite(cost).all():
            raise ValueError("stage cost must be finite")
        if (cost < 0).any():
            raise NegativeEntry("stage cost has a negative entry")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"discount must lie in (0, 1], got {self.beta!r}")
        for name, x in (("x0", self.x0), ("x0_prime", self.x0_prime)):
            if not 0 <= x < n:
                raise ValueError(f"{name} index {x} out of range for {n} states")
        object.__setattr__(self, "stage_cost", cost)

    @property
    def n(self) -> int:
        return self.P.n

    def same_kernel(self) -> bool:
        return self.P is self.P_prime or np.array_equal(self.P.rows, self.P_prime.rows)

    def is_coupling_time_instance(self) -> bool:
        """Single kernel, 0-1 stage cost, undiscounted: expected coupling time."""
        return (
            self.beta == 1.0
            and self.same_kernel()
            and np.array_equal(self.stage_cost, discrete_metric(self.n))
        )


def coupling_time_instance(P: TransitionKernel, x0: int, x0_prime: int) -> ProblemSpec:
    """Convenience constructor for the expected-coupling-time problem."""
    return ProblemSpec(P, P, x0, x0_prime, discrete_metric(P.n), 1.0)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of value iteration."""

    value_table: np.ndarray
    iterations: int
    residual: float
    converged: bool
    regime: str  # "discounted" | "undiscounted"
    infinite_flags: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class FixedPointReport:
    """Fixed-point equation diagnostics; diagonal/finite checks only apply to
    the coupling-time instance and are None otherwise."""

    residual: float
    is_fixed_point: bool
    diagonal_ok: bool | None
    finite_ok: bool | None


def _table_gap(A: np.ndarray, B: np.ndarray) -> float:
    """sup |A - B| treating cells where both are +inf as agreeing."""
    both_inf = np.isinf(A) & np.isinf(B)
    diff = np.abs(A - B)
    diff[both_inf] = 0.0
    return float(np.nan_to_num(diff, nan=math.inf).max())


def apply_bellman(V: np.ndarray, spec: ProblemSpec, threads: int | None = None) -> np.ndarray:
    """One exact Bellman sweep: c + beta * (inner transport value) per pair."""
    V = np.asarray(V, dtype=float)
    n = spec.n
    if V.shape != (n, n):
        raise DimensionMismatch(f"value table must be {n}x{n}, got {V.shape}")
    finite = np.isfinite(V)
    if finite.all():
        inf_flat = None
        fin_flat = V.reshape(-1).tolist()
    else:
        inf_flat = [0 if ok else 1 for ok in finite.reshape(-1)]
        fin_flat = np.where(finite, V, 0.0).reshape(-1).tolist()
    rows_p = [r.tolist() for r in spec.P.rows]
    rows_q = [r.tolist() for r in spec.P_prime.rows]
    inner = np.empty((n, n))

    def sweep_row(x: int) -> None:
        p = rows_p[x]
        for xp in range(n):
            forbidden, value, _ = _transport_core(p, rows_q[xp], fin_flat, inf_flat)
            inner[x, xp] = math.inf if forbidden > MASS_EPS else value

    if threads and threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=min(threads, n)) as pool:
            list(pool.map(sweep_row, range(n)))
    else:
        for x in range(n):
            sweep_row(x)
    return spec.stage_cost + spec.beta * inner


def apply_policy_operator(V: np.ndarray, Q: CouplingKernel, spec: ProblemSpec) -> np.ndarray:
    """c + beta * Q V for a fixed coupling kernel Q."""
    V = np.asarray(V, dtype=float)
    n = spec.n
    if V.shape != (n, n) or Q.n != n:
        raise DimensionMismatch("value table / coupling size mismatch")
    if not validate_coupling(Q, spec.P, spec.P_prime, tol=1e-9):
        raise InvalidCoupling("coupling does not match the problem kernels")
    finite = np.isfinite(V)
    if finite.all():
        expect = np.einsum("xpyq,yq->xp", Q.plans, V)
    else:
        expect = np.einsum("xpyq,yq->xp", Q.plans, np.where(finite, V, 0.0))
        inf_mass = np.einsum("xpyq,yq->xp", Q.plans, (~finite).astype(float))
        expect = np.where(inf_mass > MASS_EPS, math.inf, expect)
    return spec.stage_cost + spec.beta * expect


def value_iterate(
    spec: ProblemSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: int | None = None,
) -> SolveReport:
    """Fixed-point iteration V_k = T(V_{k-1}) from the zero table.

    beta < 1: stops once the sweep residual is at most tol*(1-beta)/beta,
    which bounds the remaining distance to the fixed point by tol.
    beta = 1: iterates are nondecreasing; stops at residual <= tol, else
    reports non-convergence after max_iter sweeps and flags entries above
    the divergence ceiling n^2 * max(c) * 1e6 as possibly infinite.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    n = spec.n
    discounted = spec.beta < 1.0
    stop = tol * (1.0 - spec.beta) / spec.beta if discounted else tol
    V = np.zeros((n, n))
    residual = math.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        V_next = apply_bellman(V, spec, threads=threads)
        residual = float(np.abs(V_next - V).max())
        V = V_next
        if residual <= stop:
            converged = True
            break
    flags: set[tuple[int, int]] = set()
    if not discounted:
        cmax = float(spec.stage_cost.max())
        if cmax > 0.0:
            ceiling = n * n * cmax * _DIVERGENCE_FACTOR
            for x, xp in np.argwhere(V > ceiling):
                flags.add((int(x), int(xp)))
    V.flags.writeable = False
    return SolveReport(
        value_table=V,
        iterations=iterations,
        residual=residual,
        converged=converged,
        regime="discounted" if discounted else "undiscounted",
        infinite_flags=frozenset(flags),
    )


def extract_greedy_coupling(V: np.ndarray, spec: ProblemSpec) -> CouplingKernel:
    """Per pair, the argmin transport plan against the value table V.

    Pairs where V itself is +inf have no meaningful greedy action and
    receive the independent plan.
    """
    V = np.asarray(V, dtype=float)
    n = spec.n
    if V.shape != (n, n):
        raise DimensionMismatch(f"value table must be {n}x{n}, got {V.shape}")
    plans = np.empty((n, n, n, n))
    for x in range(n):
        p = spec.P.rows[x]
        for xp in range(n):
            q = spec.P_prime.rows[xp]
            if math.isinf(V[x, xp]):
                plans[x, xp] = np.outer(p, q)
            else:
                plans[x, xp] = solve_transport(p, q, V).plan.mass
    plans.flags.writeable = False
    return CouplingKernel(plans)


def verify_fixed_point(V: np.ndarray, spec: ProblemSpec, tol: float = 1e-8) -> FixedPointReport:
    """Residual of V against one Bellman sweep, plus coupling-time checks.

    For the coupling-time instance the optimal cost is the unique table with
    0 <= V < inf, V = T(V) and zero diagonal, so those two extra conditions
    are evaluated; otherwise they are reported as None.
    """
    V = np.asarray(V, dtype=float)
    residual = _table_gap(apply_bellman(V, spec), V)
    diagonal_ok: bool | None = None
    finite_ok: bool | None = None
    if spec.is_coupling_time_instance():
        diagonal_ok = bool(np.abs(np.diagonal(V)).max() <= tol)
        finite_ok = bool(np.isfinite(V).all())
    return FixedPointReport(
        residual=residual,
        is_fixed_point=residual <= tol,
        diagonal_ok=diagonal_ok,
        finite_ok=finite_ok,
    )


def verify_optimal_coupling(
    Q: CouplingKernel, V: np.ndarray, spec: ProblemSpec, tol: float = 1e-8
) -> bool:
    """True iff T_Q(V) = V within tol; at V = optimal cost this is the
    necessary-and-sufficient optimality test for Q."""
    return _table_gap(apply_policy_operator(V, Q, spec), np.asarray(V, dtype=float)) <= tol


def _diagonal_hitting_times(Qbar: np.ndarray, c_flat: np.ndarray, n: int) -> np.ndarray:
    """Expected cost until absorption on the diagonal, +inf where absorption
    is not almost sure."""
    nn = n * n
    diag = {x * n + x for x in range(n)}
    off = [s for s in range(nn) if s not in diag]
    support = Qbar > MASS_EPS
    # states that can reach the diagonal through off-diagonal paths
    reach_diag = set()
    frontier = [s for s in off if any(support[s, d] for d in diag)]
    reach_diag.update(frontier)
    rev = {s: [] for s in off}
    for s in off:
        for t in off:
            if support[s, t]:
                rev[t].append(s)
    while frontier:
        nxt = []
        for t in frontier:
            for s in rev[t]:
                if s not in reach_diag:
                    reach_diag.add(s)
                    nxt.append(s)
        frontier = nxt
    dead = [s for s in off if s not in reach_diag]
    # states that can reach a dead state have a positive chance of never coupling
    tainted = set(dead)
    frontier = list(dead)
    while frontier:
        nxt = []
        for t in frontier:
            for s in rev[t]:
                if s not in tainted:
                    tainted.add(s)
                    nxt.append(s)
        frontier = nxt
    good = [s for s in off if s not in tainted]
    v = np.zeros(nn)
    for s in tainted:
        v[s] = math.inf
    if good:
        idx = np.array(good)
        A = np.eye(len(good)) - Qbar[np.ix_(idx, idx)]
        try:
            v[idx] = np.linalg.solve(A, c_flat[idx])
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"absorbing system is singular: {exc}") from exc
    return v


def evaluate_policy(
    Q: CouplingKernel,
    spec: ProblemSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Exact expected discounted cost of following the fixed coupling Q.

    beta < 1: solves (I - beta Qbar) v = c directly while the pair space has
    at most 4096 states, otherwise by capped power series. beta = 1 with the
    0-1 cost and a sticky Q: solves the absorbing hitting-time system, with
    +inf where the diagonal is not reached almost surely. Any other beta = 1
    case: capped partial sums with the same divergence flagging as value
    iteration.
    """
    n = spec.n
    if Q.n != n:
        raise DimensionMismatch("coupling size mismatch")
    if not validate_coupling(Q, spec.P, spec.P_prime, tol=1e-9):
        raise InvalidCoupling("coupling does not match the problem kernels")
    nn = n * n
    Qbar = Q.as_pair_matrix()
    c_flat = spec.stage_cost.reshape(-1)
    if spec.beta < 1.0:
        if nn <= _DIRECT_SOLVE_LIMIT:
            try:
                v = np.linalg.solve(np.eye(nn) - spec.beta * Qbar, c_flat)
            except np.linalg.LinAlgError as exc:
                raise SingularSystem(f"discounted system is singular: {exc}") from exc
        else:
            v = np.zeros(nn)
            for _ in range(max_iter):
                v_next = c_flat + spec.beta * (Qbar @ v)
                if np.abs(v_next - v).max() <= tol * (1.0 - spec.beta) / spec.beta:
                    v = v_next
                    break
                v = v_next
        return v.reshape(n, n)
    sticky_metric = np.array_equal(spec.stage_cost, discrete_metric(n)) and check_sticky(
        Q, spec.P, tol=1e-9
    )
    if sticky_metric:
        return _diagonal_hitting_times(Qbar, c_flat, n).reshape(n, n)
    v = np.zeros(nn)
    for _ in range(max_iter):
        v_next = c_flat + Qbar @ v
        if np.abs(v_next - v).max() <= tol:
            v = v_next
            break
        v = v_next
    cmax = float(spec.stage_cost.max())
    if cmax > 0.0:
        v = np.where(v > nn * cmax * _DIVERGENCE_FACTOR, math.inf, v)
    return v.reshape(n, n)
