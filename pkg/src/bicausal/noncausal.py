"""Non-causal (unconstrained) transport cost between two starts of one chain.

For a single kernel P and the discounted 0-1 cost, the unconstrained optimal
transport cost between Markov(x0, P) and Markov(x0', P) is the maximal
coupling series

    W(x0, x0') = sum_k beta^k * TV(P^k(x0,.), P^k(x0',.)).

The series is summed with a certified geometric tail: once some power P^m
contracts, TV of the k-step rows is at most delta(P^m)^floor(k/m), so the
remainder after K terms is below

    beta^K * delta^floor(K/m) * (1 + beta + ... + beta^(m-1)) / (1 - beta^m * delta).

Two-state chains also admit printed closed forms for both the non-causal
and the adapted cost; see the caveat on :func:`two_state_closed_forms`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import TransitionKernel, doeblin_coefficient, tv_distance, validate_kernel
from .errors import NoContraction, NotTwoState

W_FORMULA_CAVEAT = (
    "the printed two-state closed form for the non-causal cost disagrees with "
    "the maximal-coupling series on the same instances (for example 10/9 vs "
    "10/3 on [[0.9,0.1],[0.2,0.8]], and 0 for symmetric kernels although any "
    "coupling pays at least 1 at step 0); the series value is the one used "
    "for bounds"
)


@dataclass(frozen=True)
class SeriesResult:
    """Truncated series value with a certified remainder: the exact value
    lies in [value, value + tail_bound]."""

    value: float
    terms_used: int
    tail_bound: float


@dataclass(frozen=True)
class TwoStateForms:
    """The two printed closed forms for a two-state chain.

    ``w_formula`` is reported verbatim and carries a permanent caveat flag;
    see ``W_FORMULA_CAVEAT``. ``w_bc_formula`` is the adapted cost
    1 / (1 - TV) and agrees with value iteration.
    """

    w_formula: float
    w_bc_formula: float
    w_formula_caveat: bool = True


def contracting_power(P: TransitionKernel):
    """Smallest m in 1, 2, 4, ... with delta(P^m) < 1, or None.

    The doubling search runs up to the first power of two at or above n^2,
    which covers the worst-case primitivity index of an irreducible
    aperiodic kernel.
    """
    n = P.n
    m = 1
    power = np.array(P.rows)
    while True:
        delta = doeblin_coefficient(validate_kernel(power))
        if delta < 1.0:
            return m, delta
        if m >= n * n:
            return None
        m *= 2
        power = power @ power


def noncausal_cost_series(
    P: TransitionKernel,
    x0: int,
    x0_prime: int,
    beta: float = 1.0,
    tol: float = 1e-9,
    max_terms: int = 10_000_000,
) -> SeriesResult:
    """Sum beta^k * TV(P^k(x0,.), P^k(x0',.)) to a certified tolerance.

    For beta = 1 some power of P must contract (NoContraction otherwise);
    for beta < 1 a contracting power merely sharpens the tail bound.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"discount must lie in (0, 1], got {beta!r}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    n = P.n
    for x in (x0, x0_prime):
        if not 0 <= x < n:
            raise IndexError(f"state index {x} out of range")
    found = contracting_power(P)
    if found is None:
        if beta == 1.0:
            raise NoContraction(
                "no power of the kernel contracts in total variation; "
                "the undiscounted series has no certified tail"
            )
        m, delta = 1, 1.0  # tail falls back to the pure geometric beta bound
    else:
        m, delta = found
    block = sum(beta**r for r in range(m))
    denom = 1.0 - beta**m * delta

    def tail(k: int) -> float:
        return beta**k * delta ** (k // m) * block / denom

    p = np.zeros(n)
    p[x0] = 1.0
    q = np.zeros(n)
    q[x0_prime] = 1.0
    value = 0.0
    bk = 1.0
    k = 0
    while True:
        term = tv_distance(p, q)
        if term == 0.0:
            # equal k-step laws stay equal forever: the tail is exactly zero
            return SeriesResult(value=value, terms_used=k + 1, tail_bound=0.0)
        value += bk * term
        k += 1
        bk *= beta
        bound = tail(k)
        if bound < tol:
            return SeriesResult(value=value, terms_used=k, tail_bound=bound)
        if k >= max_terms:
            raise RuntimeError(f"series did not certify within {max_terms} terms")
        p = p @ P.rows
        q = q @ P.rows


def two_state_closed_forms(P: TransitionKernel) -> TwoStateForms:
    """Both printed closed forms for a two-state chain, caveat included.

    w_bc_formula = 1 / (1 - TV) is the adapted cost between the two starts.
    w_formula = |P(0,1) - P(1,0)| / (P(0,1) + P(1,0)) / (1 - TV) is reported
    exactly as printed and flagged: it is inconsistent with the
    maximal-coupling series (see ``W_FORMULA_CAVEAT``) and is never
    substituted by a correction here.
    """
    if P.n != 2:
        raise NotTwoState(f"closed forms need a 2-state chain, got {P.n} states")
    up = float(P.rows[0, 1])
    down = float(P.rows[1, 0])
    tv = tv_distance(P.rows[0], P.rows[1])
    w_bc = 1.0 / (1.0 - tv) if tv < 1.0 else math.inf
    if up + down == 0.0:
        w = math.nan
    elif tv < 1.0:
        w = abs(up - down) / (up + down) / (1.0 - tv)
    else:
        w = math.inf if up != down else math.nan
    return TwoStateForms(w_formula=w, w_bc_formula=w_bc)
