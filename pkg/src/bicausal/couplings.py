"""Markovian couplings of two transition kernels.

A Markovian coupling is a transition kernel on the product state space whose
one-step law from (x, x') has row marginal P(x, .) and column marginal
P'(x', .). Couplings are stored densely: ``plans[x, xp]`` is the (n, n)
joint distribution of the next pair.

The three named constructors are the classic (Doeblin) coupling, the
independent coupling and the Wasserstein coupling, which matches the two
next states with the largest possible probability, 1 - TV(P(x,.), P'(x',.)),
before letting the mismatched remainder move conditionally independently.
The constructors accept distinct kernels; with P = P' they reduce to the
usual single-kernel formulas. A "move together" branch applies only where
the two conditioning rows are identical, since sticking is undefined
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import TransitionKernel, tv_distance
from .errors import DimensionMismatch, InvalidCoupling


@dataclass(frozen=True, eq=False)
class CouplingKernel:
    """Transition kernel on state pairs; plans[x, xp] couples P(x,.) and P'(xp,.)."""

    plans: np.ndarray  # shape (n, n, n, n)

    def __post_init__(self):
        if self.plans.ndim != 4 or len(set(self.plans.shape)) != 1:
            raise DimensionMismatch(f"coupling plans must be (n,n,n,n), got {self.plans.shape}")

    @property
    def n(self) -> int:
        return self.plans.shape[0]

    def plan(self, x: int, xp: int) -> np.ndarray:
        return self.plans[x, xp]

    def as_pair_matrix(self) -> np.ndarray:
        """(n^2, n^2) transition matrix over pairs, row-major pair indexing."""
        n = self.n
        return self.plans.reshape(n * n, n * n)

    def implied_marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """Row/column marginals of every plan: shapes (n, n, n)."""
        return self.plans.sum(axis=3), self.plans.sum(axis=2)

    def check_internal(self, tol: float = 1e-9) -> None:
        """Raise InvalidCoupling unless entries are >= -tol and plans sum to 1."""
        if (self.plans < -tol).any():
            raise InvalidCoupling("coupling has a negative plan entry")
        totals = self.plans.sum(axis=(2, 3))
        if np.abs(totals - 1.0).max() > tol:
            raise InvalidCoupling("coupling plan does not sum to one")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def classic_coupling(P: TransitionKernel) -> CouplingKernel:
    """Doeblin's coupling: independent moves off the diagonal, glued on it."""
    r = P.rows
    n = P.n
    plans = np.einsum("xy,pq->xpyq", r, r)
    for x in range(n):
        plans[x, x] = np.diag(r[x])
    return CouplingKernel(_frozen(plans))


def independent_coupling(P: TransitionKernel, P_prime: TransitionKernel) -> CouplingKernel:
    """The two chains move independently at all times."""
    if P.n != P_prime.n:
        raise DimensionMismatch("kernels live on different state spaces")
    plans = np.einsum("xy,pq->xpyq", P.rows, P_prime.rows)
    return CouplingKernel(_frozen(plans))


def wasserstein_coupling(P: TransitionKernel, P_prime: TransitionKernel) -> CouplingKernel:
    """Match next states with probability 1 - TV, remainder independent.

    From pair (x, x'): each common target (y, y) receives
    min(P(x,y), P'(x',y)); the residual mass lands on (y, y'), y != y',
    proportionally to (P(x,y)-P'(x',y))+ * (P'(x',y')-P(x,y'))+ / TV.
    Rows that agree exactly move together.
    """
    if P.n != P_prime.n:
        raise DimensionMismatch("kernels live on different state spaces")
    n = P.n
    plans = np.zeros((n, n, n, n))
    for x in range(n):
        r = P.rows[x]
        for xp in range(n):
            s = P_prime.rows[xp]
            if x == xp and np.array_equal(r, s):
                plans[x, xp] = np.diag(r)
                continue
            tv = tv_distance(r, s)
            plan = np.diag(np.minimum(r, s))
            if tv > 0.0:
                excess = np.clip(r - s, 0.0, None)
                deficit = np.clip(s - r, 0.0, None)
                plan = plan + np.outer(excess, deficit) / tv
            plans[x, xp] = plan
    return CouplingKernel(_frozen(plans))


def validate_coupling(
    Q: CouplingKernel,
    P: TransitionKernel,
    P_prime: TransitionKernel,
    tol: float = 1e-9,
) -> bool:
    """True iff every plan reproduces P(x,.) and P'(x',.) within tol."""
    if Q.n != P.n or Q.n != P_prime.n:
        return False
    if (Q.plans < -tol).any():
        return False
    row_marg, col_marg = Q.implied_marginals()
    row_err = np.abs(row_marg - P.rows[:, None, :]).max()
    col_err = np.abs(col_marg - P_prime.rows[None, :, :]).max()
    return bool(max(row_err, col_err) <= tol)


def check_sticky(Q: CouplingKernel, P: TransitionKernel, tol: float = 1e-9) -> bool:
    """True iff from every diagonal pair the chains move identically.

    That is Q((x,x),(y,y')) = 1{y=y'} P(x,y) within tol.
    """
    if Q.n != P.n:
        return False
    n = Q.n
    for x in range(n):
        if np.abs(Q.plans[x, x] - np.diag(P.rows[x])).max() > tol:
            return False
    return True
