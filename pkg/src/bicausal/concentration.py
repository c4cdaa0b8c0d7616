"""Bounded-differences concentration bounds for Markov chain functionals.

For f that is 1-Lipschitz in the Hamming distance and X a chain with kernel
P, the martingale method bounds each martingale difference range by the
sup-norm of a transport-cost table, giving

    Pr(|f(X_1..X_n) - E f| >= t) <= 2 exp(-2 t^2 / (n * proxy^2)).

Three variance proxies are offered, ordered series <= dp <= doeblin whenever
all are defined: the maximal-coupling series sup, the adapted cost sup from
value iteration, and the contraction bound 1 / (1 - delta(P)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dp import ProblemSpec, value_iterate
from .errors import InfiniteProxy, NoContraction, NotCouplingInstance
from .chain import doeblin_coefficient
from .noncausal import noncausal_cost_series

PROXY_MODES = ("noncausal_series", "bicausal_dp", "doeblin")


@dataclass(frozen=True)
class BoundRequest:
    """Number of chain steps n and deviation t for the concentration bound."""

    n: int
    t: float
    proxy_mode: str = "doeblin"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"step count must be at least 1, got {self.n}")
        if not self.t > 0:
            raise ValueError(f"deviation must be positive, got {self.t!r}")
        if self.proxy_mode not in PROXY_MODES:
            raise ValueError(f"proxy_mode must be one of {PROXY_MODES}")


def variance_proxy(
    spec: ProblemSpec,
    mode: str,
    tol: float = 1e-9,
    max_iter: int = 100_000,
) -> float:
    """Sup-norm transport-cost proxy controlling the martingale differences.

    noncausal_series / bicausal_dp need the coupling-time instance
    (P = P', 0-1 cost, beta = 1); doeblin needs delta(P) < 1.
    """
    if mode not in PROXY_MODES:
        raise ValueError(f"proxy mode must be one of {PROXY_MODES}")
    if mode == "doeblin":
        delta = doeblin_coefficient(spec.P)
        if delta >= 1.0:
            raise NoContraction("doeblin proxy needs delta(P) < 1")
        return 1.0 / (1.0 - delta)
    if not spec.is_coupling_time_instance():
        raise NotCouplingInstance(
            "series and dp proxies need P = P', the 0-1 cost and beta = 1"
        )
    n = spec.n
    if mode == "noncausal_series":
        best = 0.0
        for x in range(n):
            for xp in range(x + 1, n):
                res = noncausal_cost_series(spec.P, x, xp, beta=1.0, tol=tol)
                best = max(best, res.value + res.tail_bound)
        return best
    report = value_iterate(spec, tol=tol, max_iter=max_iter)
    if report.infinite_flags:
        return math.inf
    return float(report.value_table.max())


def mcdiarmid_bound(req: BoundRequest, proxy: float) -> float:
    """2 exp(-2 t^2 / (n proxy^2)), clamped at the trivial bound 2."""
    if math.isinf(proxy):
        raise InfiniteProxy("infinite proxy: the bound degenerates to 2")
    if not proxy > 0:
        raise ValueError(f"proxy must be positive, got {proxy!r}")
    return min(2.0, 2.0 * math.exp(-2.0 * req.t**2 / (req.n * proxy**2)))
