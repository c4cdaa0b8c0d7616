"""Finite-state Markov chain primitives.

States are addressed by integer index throughout the numerical code; the
ordered label set lives in :class:`StateSpace` and is consulted only at I/O
boundaries. Kernels are validated once at construction: entries at or above
-1e-12 are clamped to zero, rows must sum to one within 1e-9 and are then
renormalized exactly, so downstream algebra can assume exact stochasticity.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DimensionMismatch, NegativeEntry, NonSquare, RowSumViolation

ROW_SUM_TOL = 1e-9
ENTRY_CLAMP = -1e-12


@dataclass(frozen=True)
class StateSpace:
    """Ordered, pairwise-distinct state labels; index <-> label is a bijection."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("state space must contain at least one state")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("state labels must be pairwise distinct")
        object.__setattr__(self, "_lookup", {s: i for i, s in enumerate(self.labels)})

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._lookup[label]
        except KeyError:
            raise ValueError(f"unknown state label {label!r}") from None

    def label(self, i: int) -> str:
        return self.labels[i]

    @staticmethod
    def of_size(n: int) -> "StateSpace":
        return StateSpace(tuple(f"s{i}" for i in range(n)))


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Row-stochastic matrix; row x is the next-state distribution from x.

    Construct through :func:`validate_kernel`, which owns the checks.
    """

    rows: np.ndarray

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def row(self, x: int) -> np.ndarray:
        return self.rows[x]

    def power(self, k: int) -> np.ndarray:
        """k-th matrix power; repeated squaring once k exceeds 64."""
        if k < 0:
            raise ValueError("kernel power must be nonnegative")
        n = self.n
        if k == 0:
            return np.eye(n)
        if k <= 64:
            out = self.rows
            for _ in range(k - 1):
                out = out @ self.rows
            return np.array(out)
        out = np.eye(n)
        base = np.array(self.rows)
        e = k
        while e:
            if e & 1:
                out = out @ base
            base = base @ base
            e >>= 1
        return out


@dataclass(frozen=True)
class ChainSpec:
    """A chain: state space, kernel and the fixed initial state."""

    space: StateSpace
    kernel: TransitionKernel
    initial: int

    def __post_init__(self):
        if self.kernel.n != self.space.n:
            raise DimensionMismatch(
                f"kernel is {self.kernel.n}-state but space has {self.space.n} labels"
            )
        if not 0 <= self.initial < self.space.n:
            raise ValueError(f"initial state index {self.initial} out of range")


def validate_distribution(vec) -> np.ndarray:
    """Validate a probability vector and renormalize it exactly.

    Entries in [-1e-12, 0) are clamped to zero; entries below that raise
    NegativeEntry, and a total mass off from one by more than 1e-9 raises
    RowSumViolation.
    """
    v = np.array(vec, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatch("distribution must be a nonempty vector")
    if np.isnan(v).any():
        raise NegativeEntry("distribution contains NaN")
    if (v < ENTRY_CLAMP).any():
        i = int(np.argmin(v))
        raise NegativeEntry(f"distribution entry {i} is negative: {float(v[i])!r}")
    v[v < 0.0] = 0.0
    s = float(v.sum())
    if not math.isfinite(s) or abs(s - 1.0) > ROW_SUM_TOL:
        raise RowSumViolation(f"probabilities sum to {s!r}, expected 1 within {ROW_SUM_TOL}")
    v /= s
    v.flags.writeable = False
    return v


def validate_kernel(matrix) -> TransitionKernel:
    """Validate a square nonnegative matrix with unit row sums.

    Rows are renormalized by their sum after validation, so the returned
    kernel is exactly row-stochastic up to floating-point division.
    """
    m = np.array(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise NonSquare(f"kernel must be a nonempty square matrix, got shape {m.shape}")
    if np.isnan(m).any():
        raise NegativeEntry("kernel contains NaN")
    bad = m < ENTRY_CLAMP
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise NegativeEntry(f"kernel entry ({i},{j}) is negative: {float(m[i, j])!r}")
    m[m < 0.0] = 0.0
    sums = m.sum(axis=1)
    off = np.abs(sums - 1.0)
    if not np.isfinite(sums).all() or (off > ROW_SUM_TOL).any():
        i = int(np.argmax(np.where(np.isfinite(off), off, np.inf)))
        raise RowSumViolation(
            f"row {i} sums to {float(sums[i])!r}, off from 1 by more than {ROW_SUM_TOL}"
        )
    m /= sums[:, None]
    m.flags.writeable = False
    return TransitionKernel(m)


def tv_distance(p, q) -> float:
    """Total variation distance, i.e. half the L1 distance."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"distribution shapes differ: {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


def k_step_distribution(kernel: TransitionKernel, x: int, k: int) -> np.ndarray:
    """Row x of the k-th kernel power; k = 0 gives the point mass at x."""
    if k < 0:
        raise ValueError("step count must be nonnegative")
    if not 0 <= x < kernel.n:
        raise IndexError(f"state index {x} out of range")
    if k == 0:
        out = np.zeros(kernel.n)
        out[x] = 1.0
        return out
    return np.array(kernel.power(k)[x])


def doeblin_coefficient(kernel: TransitionKernel) -> float:
    """Maximum total variation distance between kernel rows.

    A value below one certifies one-step contraction of row distributions.
    """
    r = kernel.rows
    if r.shape[0] == 1:
        return 0.0
    diffs = np.abs(r[:, None, :] - r[None, :, :]).sum(axis=2)
    return min(1.0, float(0.5 * diffs.max()))


def _component_period(sub: np.ndarray) -> int:
    """gcd of cycle lengths inside one strongly connected component."""
    k = sub.shape[0]
    level = np.full(k, -1, dtype=int)
    level[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(sub[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(int(v))
    g = 0
    for u in range(k):
        for v in np.flatnonzero(sub[u]):
            g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g


def structure_flags(kernel: TransitionKernel) -> tuple[bool, bool]:
    """(irreducible, aperiodic) from the directed graph of positive entries.

    Aperiodicity is evaluated per strongly connected component; components
    with no internal edge carry no cycle and are ignored.
    """
    support = kernel.rows > 0.0
    ncomp, labels = connected_components(
        csr_matrix(support), directed=True, connection="strong"
    )
    irreducible = ncomp == 1
    aperiodic = True
    for comp in range(ncomp):
        nodes = np.flatnonzero(labels == comp)
        sub = support[np.ix_(nodes, nodes)]
        if not sub.any():
            continue
        if _component_period(sub) != 1:
            aperiodic = False
            break
    return irreducible, aperiodic
