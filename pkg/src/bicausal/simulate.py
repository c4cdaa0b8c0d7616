"""Monte Carlo sampling of coupled trajectories.

Randomness is counter-based so that serial, batched and threaded runs agree
bit for bit: trajectory i under master seed s draws its t-th uniform as

    u(i, t) = mix64(key_i + GOLDEN * (t + 1)) >> 11, scaled by 2^-53,
    key_i   = mix64(s + GOLDEN * (i + 1)),

where mix64 is the splitmix64 finalizer. Plan rows are sampled by inverse
CDF over the row-major flattening of the n x n plan, so a draw is the count
of cumulative-sum entries at or below the uniform.

Estimators process trajectories in fixed-size chunks (vectorized over the
chunk); statistics are reduced over the full index-ordered array, so thread
count and chunking never change the result.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .couplings import CouplingKernel
from .dp import ProblemSpec, discrete_metric
from .errors import InvalidCoupling, TruncationUnsafe

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_CHUNK = 1 << 16

_G64 = np.uint64(_GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 2.0**-53


def _mix(z: int) -> int:
    """splitmix64 finalizer on Python ints."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def trajectory_key(master_seed: int, index: int) -> int:
    """Stream key of one trajectory under a master seed."""
    return _mix((master_seed + _GOLDEN * (index + 1)) & _MASK)


def _trajectory_keys(master_seed: int, indices: np.ndarray) -> np.ndarray:
    base = np.uint64(master_seed & _MASK)
    with np.errstate(over="ignore"):
        return _mix_np(base + _G64 * (indices.astype(np.uint64) + np.uint64(1)))


def _uniform(key: int, step: int) -> float:
    return (_mix((key + _GOLDEN * (step + 1)) & _MASK) >> 11) * _INV53


def _uniforms(keys: np.ndarray, step: int) -> np.ndarray:
    offset = np.uint64((_GOLDEN * (step + 1)) & _MASK)
    z = _mix_np(keys + offset)
    return (z >> _S11).astype(np.float64) * _INV53


@dataclass(frozen=True)
class SimulationConfig:
    samples: int
    horizon_cap: int = 1_000_000
    master_seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if self.horizon_cap < 1:
            raise ValueError("horizon cap must be at least 1")


@dataclass(frozen=True)
class CouplingTimeStats:
    """Mean first-meeting time over uncensored trajectories.

    Trajectories still uncoupled at the horizon cap are counted as censored
    and excluded from the mean, never silently dropped.
    """

    mean: float
    std_error: float
    censored: int
    samples: int


@dataclass(frozen=True)
class DiscountedCostEstimate:
    """Monte Carlo mean of the truncated discounted cost sum.

    ``truncation_bound`` is a deterministic bound on the per-trajectory
    truncation error (infinite if any beta = 1 trajectory hit the cap).
    """

    mean: float
    std_error: float
    truncation_bound: float
    censored: int
    samples: int


def _check_coupling(Q: CouplingKernel) -> None:
    Q.check_internal(tol=1e-9)


def _is_sticky_zero_diag(Q: CouplingKernel, cost: np.ndarray, tol: float = 1e-9) -> bool:
    n = Q.n
    if np.abs(np.diagonal(cost)).max() > tol:
        return False
    offdiag = ~np.eye(n, dtype=bool)
    return all(Q.plans[x, x][offdiag].max() <= tol for x in range(n))


def _cumulative_rows(Q: CouplingKernel) -> np.ndarray:
    n = Q.n
    return Q.plans.reshape(n, n, n * n).cumsum(axis=2)


def sample_coupled_trajectory(
    Q: CouplingKernel, x0: int, x0_prime: int, horizon: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """One coupled path of length horizon+1, deterministic in the seed.

    ``seed`` is used directly as the stream key, so passing
    ``trajectory_key(master, i)`` reproduces trajectory i of the batched
    estimators exactly.
    """
    _check_coupling(Q)
    n = Q.n
    for x in (x0, x0_prime):
        if not 0 <= x < n:
            raise IndexError(f"state index {x} out of range")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    cums = _cumulative_rows(Q)
    key = seed & _MASK
    xs = np.empty(horizon + 1, dtype=np.int64)
    ys = np.empty(horizon + 1, dtype=np.int64)
    xs[0], ys[0] = x0, x0_prime
    for t in range(horizon):
        u = _uniform(key, t)
        row = cums[xs[t], ys[t]]
        k = int(np.searchsorted(row, u, side="right"))
        if k >= n * n:
            k = n * n - 1
        xs[t + 1], ys[t + 1] = divmod(k, n)
    return xs, ys


def _run_chunks(worker, starts_sizes, threads):
    if threads and threads > 1 and len(starts_sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda a: worker(*a), starts_sizes))
    return [worker(*a) for a in starts_sizes]


def _chunk_layout(samples: int) -> list[tuple[int, int]]:
    return [(s, min(_CHUNK, samples - s)) for s in range(0, samples, _CHUNK)]


def estimate_coupling_time(
    Q: CouplingKernel,
    x0: int,
    x0_prime: int,
    cfg: SimulationConfig,
    threads: int | None = None,
) -> CouplingTimeStats:
    """Empirical mean and standard error of the first-meeting time."""
    _check_coupling(Q)
    n = Q.n
    if not _is_sticky_zero_diag(Q, discrete_metric(n)):
        warnings.warn(
            "coupling is not sticky: the first-meeting time is not the "
            "0-1 discounted cost under this coupling",
            stacklevel=2,
        )
    cums = _cumulative_rows(Q)

    def worker(start: int, count: int) -> np.ndarray:
        keys = _trajectory_keys(cfg.master_seed, np.arange(start, start + count))
        cx = np.full(count, x0, dtype=np.int64)
        cy = np.full(count, x0_prime, dtype=np.int64)
        T = np.full(count, -1, dtype=np.int64)
        if x0 == x0_prime:
            T[:] = 0
            return T
        alive = np.ones(count, dtype=bool)
        for t in range(cfg.horizon_cap):
            idx_alive = np.flatnonzero(alive)
            u = _uniforms(keys[idx_alive], t)
            rows = cums[cx[idx_alive], cy[idx_alive]]
            k = np.minimum((rows <= u[:, None]).sum(axis=1), n * n - 1)
            y, yp = np.divmod(k, n)
            cx[idx_alive] = y
            cy[idx_alive] = yp
            met = y == yp
            T[idx_alive[met]] = t + 1
            alive[idx_alive[met]] = False
            if not alive.any():
                break
        return T

    parts = _run_chunks(worker, _chunk_layout(cfg.samples), threads)
    T = np.concatenate(parts)
    uncensored = T[T >= 0]
    censored = int(cfg.samples - uncensored.size)
    if uncensored.size == 0:
        return CouplingTimeStats(math.nan, math.nan, censored, cfg.samples)
    mean = float(uncensored.mean())
    if uncensored.size > 1:
        se = float(uncensored.std(ddof=1) / math.sqrt(uncensored.size))
    else:
        se = 0.0
    return CouplingTimeStats(mean, se, censored, cfg.samples)


def estimate_discounted_cost(
    Q: CouplingKernel,
    spec: ProblemSpec,
    cfg: SimulationConfig,
    threads: int | None = None,
) -> DiscountedCostEstimate:
    """Monte Carlo estimate of the discounted cost of following Q from
    (x0, x0'), with a deterministic truncation certificate.

    beta < 1 walks until the geometric tail drops below 1e-9 (TruncationUnsafe
    if the horizon cap is too small for that); beta = 1 needs a sticky Q with
    zero diagonal cost so that trajectories stop accruing once coupled.
    """
    _check_coupling(Q)
    if Q.n != spec.n:
        raise InvalidCoupling("coupling size does not match the problem")
    n = spec.n
    cost = spec.stage_cost
    cmax = float(cost.max())
    if cmax == 0.0:
        return DiscountedCostEstimate(0.0, 0.0, 0.0, 0, cfg.samples)
    sticky = _is_sticky_zero_diag(Q, cost)
    if spec.beta < 1.0:
        tail = lambda h: spec.beta**h * cmax / (1.0 - spec.beta)
        horizon = max(1, math.ceil(math.log(1e-9 * (1.0 - spec.beta) / cmax) / math.log(spec.beta)))
        if tail(cfg.horizon_cap) >= 1e-9 and horizon > cfg.horizon_cap:
            raise TruncationUnsafe(
                f"horizon cap {cfg.horizon_cap} leaves a discounted tail of "
                f"{tail(cfg.horizon_cap)!r} >= 1e-9"
            )
        horizon = min(horizon, cfg.horizon_cap)
        trunc_bound = tail(horizon)
    else:
        if not sticky:
            raise TruncationUnsafe(
                "undiscounted simulation needs a sticky coupling with zero "
                "diagonal cost; the truncated sum is uncertifiable otherwise"
            )
        horizon = cfg.horizon_cap
        trunc_bound = 0.0
    cums = _cumulative_rows(Q)

    def worker(start: int, count: int) -> tuple[np.ndarray, int]:
        keys = _trajectory_keys(cfg.master_seed, np.arange(start, start + count))
        cx = np.full(count, spec.x0, dtype=np.int64)
        cy = np.full(count, spec.x0_prime, dtype=np.int64)
        total = cost[cx, cy].copy()
        disc = spec.beta
        alive = np.ones(count, dtype=bool)
        if sticky:
            alive &= cx != cy
        for t in range(horizon):
            if sticky and not alive.any():
                break
            idx = np.flatnonzero(alive) if sticky else np.arange(count)
            u = _uniforms(keys[idx], t)
            rows = cums[cx[idx], cy[idx]]
            k = np.minimum((rows <= u[:, None]).sum(axis=1), n * n - 1)
            y, yp = np.divmod(k, n)
            cx[idx] = y
            cy[idx] = yp
            total[idx] += disc * cost[y, yp]
            disc *= spec.beta
            if sticky:
                alive[idx[y == yp]] = False
        hit_cap = int(alive.sum()) if sticky and spec.beta == 1.0 else 0
        return total, hit_cap

    parts = _run_chunks(worker, _chunk_layout(cfg.samples), threads)
    totals = np.concatenate([p[0] for p in parts])
    censored = sum(p[1] for p in parts)
    if censored:
        trunc_bound = math.inf
    mean = float(totals.mean())
    se = float(totals.std(ddof=1) / math.sqrt(totals.size)) if totals.size > 1 else 0.0
    return DiscountedCostEstimate(mean, se, trunc_bound, censored, cfg.samples)
