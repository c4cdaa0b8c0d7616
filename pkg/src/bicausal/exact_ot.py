"""Exact solver for small transportation problems with optional forbidden cells.

The inner minimization of every Bellman sweep is a classic transportation
problem: minimize sum_{y,y'} a(y,y') * cost(y,y') over joint distributions
``a`` with row marginal p and column marginal q. Costs may be +inf
(forbidden cells). Instead of a big-M surrogate, the simplex here minimizes
the pair (mass on forbidden cells, finite cost) lexicographically: the first
component is handled in exact integer arithmetic, so feasibility of a
zero-forbidden-mass plan is decided without numerical contamination. If the
minimal forbidden mass is positive the problem value is +inf and the plan
returned is one attaining that minimal forbidden mass.

Pivoting uses Bland's rule (lowest flat index enters, lowest flat index
breaks leaving ties), which makes the returned optimal vertex deterministic
run to run and prevents cycling under degeneracy.

``brute_force_transport`` is an independent oracle: it enumerates all basic
solutions (one per spanning tree of the bipartite grid graph) and takes the
best feasible one. It is exponential and intended for tests only.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, InfeasibleMarginals, NegativeEntry, TooLarge

MASS_EPS = 1e-12
MARGINAL_TOL = 1e-9
_MAX_PIVOTS = 200_000
_CACHE_TREE_LIMIT = 2_000_000
_CHUNK = 200_000


@dataclass(frozen=True)
class TransportPlan:
    """A joint distribution with prescribed marginals."""

    mass: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def marginal_error(self) -> float:
        """Largest violation of either marginal constraint."""
        row_err = np.abs(self.mass.sum(axis=1) - self.row_marginal).max()
        col_err = np.abs(self.mass.sum(axis=0) - self.col_marginal).max()
        return float(max(row_err, col_err))


class TransportSolution(NamedTuple):
    value: float
    plan: TransportPlan


def _northwest_basis(p, q, n, m):
    """Northwest-corner starting basis: n+m-1 staircase cells (a spanning tree)."""
    flow = [0.0] * (n * m)
    basis = []
    sp = list(p)
    sq = list(q)
    i = j = 0
    while True:
        t = sp[i] if sp[i] < sq[j] else sq[j]
        if t < 0.0:
            t = 0.0
        flow[i * m + j] = t
        basis.append(i * m + j)
        sp[i] -= t
        sq[j] -= t
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif sp[i] <= sq[j]:
            i += 1
        else:
            j += 1
    return flow, basis


def _tree_adjacency(basis, n, m):
    adj = [[] for _ in range(n + m)]
    for k in basis:
        i, j = divmod(k, m)
        adj[i].append((n + j, k))
        adj[n + j].append((i, k))
    return adj


def _duals(adj, cflat, n_nodes, zero):
    """Node potentials solving u_i + v_j = c_ij on the basis tree."""
    u = [None] * n_nodes
    u[0] = zero
    stack = [0]
    while stack:
        a = stack.pop()
        ua = u[a]
        for b, k in adj[a]:
            if u[b] is None:
                u[b] = cflat[k] - ua
                stack.append(b)
    return u


def _tree_path(adj, start, goal):
    """Arc ids along the unique tree path from node start to node goal."""
    prev = {start: (-1, -1)}
    stack = [start]
    while stack:
        a = stack.pop()
        if a == goal:
            break
        for b, k in adj[a]:
            if b not in prev:
                prev[b] = (a, k)
                stack.append(b)
    arcs = []
    node = goal
    while node != start:
        node, k = prev[node]
        arcs.append(k)
    arcs.reverse()
    return arcs


def _transport_core(p, q, fin_cost, inf_cost):
    """Transportation simplex over flat lists.

    p, q: marginals (lists of floats, equal totals). fin_cost: flat finite
    cost values (0.0 on forbidden cells). inf_cost: flat 0/1 ints marking
    forbidden cells, or None when every cell is allowed.

    Returns (forbidden_mass, finite_value, flow) where flow is the flat
    optimal plan. The objective is minimized lexicographically in
    (forbidden_mass, finite_value).
    """
    n = len(p)
    m = len(q)
    nm = n * m
    flow, basis = _northwest_basis(p, q, n, m)
    in_basis = bytearray(nm)
    for k in basis:
        in_basis[k] = 1
    two = inf_cost is not None
    eps = 1e-11 * (1.0 + max(abs(c) for c in fin_cost))
    n_nodes = n + m
    for _ in range(_MAX_PIVOTS):
        adj = _tree_adjacency(basis, n, m)
        u2 = _duals(adj, fin_cost, n_nodes, 0.0)
        enter = -1
        if two:
            u1 = _duals(adj, inf_cost, n_nodes, 0)
            for k in range(nm):
                if in_basis[k]:
                    continue
                i = k // m
                j = n + k % m
                r1 = inf_cost[k] - u1[i] - u1[j]
                if r1 < 0 or (r1 == 0 and fin_cost[k] - u2[i] - u2[j] < -eps):
                    enter = k
                    break
        else:
            for k in range(nm):
                if in_basis[k]:
                    continue
                if fin_cost[k] - u2[k // m] - u2[n + k % m] < -eps:
                    enter = k
                    break
        if enter < 0:
            break
        ei, ej = divmod(enter, m)
        path = _tree_path(adj, ei, n + ej)
        # Entering arc gains flow; path arcs alternate starting (and ending)
        # with a losing arc, since both endpoints touch the entering arc.
        theta = math.inf
        leave = -1
        for t in range(0, len(path), 2):
            k = path[t]
            f = flow[k]
            if f < theta or (f == theta and k < leave):
                theta = f
                leave = k
        flow[enter] = flow[enter] + theta
        for t, k in enumerate(path):
            if t % 2 == 0:
                nf = flow[k] - theta
                flow[k] = nf if nf > 0.0 else 0.0
            else:
                flow[k] += theta
        flow[leave] = 0.0
        in_basis[leave] = 0
        in_basis[enter] = 1
        basis[basis.index(leave)] = enter
    else:
        raise RuntimeError("transportation simplex did not terminate")
    forbidden_mass = 0.0
    if two:
        forbidden_mass = sum(flow[k] for k in range(nm) if inf_cost[k])
    value = 0.0
    for k in range(nm):
        f = flow[k]
        if f > 0.0 and not (two and inf_cost[k]):
            value += f * fin_cost[k]
    return forbidden_mass, value, flow


def _check_marginals(p, q, cost_shape=None):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim != 1 or q.ndim != 1:
        raise DimensionMismatch("marginals must be vectors")
    if cost_shape is not None and cost_shape != (p.size, q.size):
        raise DimensionMismatch(
            f"cost table shape {cost_shape} does not match marginals ({p.size}, {q.size})"
        )
    for name, v in (("row", p), ("column", q)):
        if (v < -MASS_EPS).any():
            raise NegativeEntry(f"{name} marginal has a negative entry")
    p = np.where(p < 0.0, 0.0, p)
    q = np.where(q < 0.0, 0.0, q)
    if abs(float(p.sum()) - float(q.sum())) > MARGINAL_TOL:
        raise InfeasibleMarginals(
            f"marginal totals differ: {float(p.sum())!r} vs {float(q.sum())!r}"
        )
    return p, q


def solve_transport(p, q, cost) -> TransportSolution:
    """Minimize <plan, cost> over plans with marginals (p, q).

    Cost entries may be +inf; if every feasible plan must place mass above
    1e-12 on infinite cells the value is +inf and the returned plan is one
    minimizing that mass. Output is deterministic (Bland pivot rule).
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise DimensionMismatch("cost table must be a matrix")
    p, q = _check_marginals(p, q, cost.shape)
    if np.isnan(cost).any():
        raise ValueError("cost table contains NaN")
    finite = np.isfinite(cost)
    if (cost[finite] < 0).any():
        raise NegativeEntry("cost table has a negative entry")
    if finite.all():
        inf_flat = None
        fin_flat = cost.reshape(-1).tolist()
    else:
        inf_flat = [0 if ok else 1 for ok in finite.reshape(-1)]
        fin_flat = np.where(finite, cost, 0.0).reshape(-1).tolist()
    forbidden, value, flow = _transport_core(p.tolist(), q.tolist(), fin_flat, inf_flat)
    mass = np.array(flow).reshape(cost.shape)
    np.maximum(mass, 0.0, out=mass)
    if inf_flat is not None:
        # zero out degenerate dust sitting on forbidden cells
        mass[(~finite) & (mass <= MASS_EPS)] = 0.0
    mass.flags.writeable = False
    plan = TransportPlan(mass, p, q)
    if forbidden > MASS_EPS:
        return TransportSolution(math.inf, plan)
    return TransportSolution(float(value), plan)


def min_infinite_mass(p, q, finite_mask) -> float:
    """Minimum total mass any feasible plan must place outside finite_mask."""
    finite_mask = np.asarray(finite_mask, dtype=bool)
    if finite_mask.ndim != 2:
        raise DimensionMismatch("finite_mask must be a matrix")
    p, q = _check_marginals(p, q, finite_mask.shape)
    if finite_mask.all():
        return 0.0
    inf_flat = [0 if ok else 1 for ok in finite_mask.reshape(-1)]
    fin_flat = [0.0] * finite_mask.size
    forbidden, _, _ = _transport_core(p.tolist(), q.tolist(), fin_flat, inf_flat)
    return max(0.0, float(forbidden))


# --- spanning-tree vertex enumeration (test oracle) ------------------------


def _enumerate_trees(n, m):
    """Yield every spanning tree of K_{n,m} as a tuple of flat arc ids."""
    n_nodes = n + m
    n_arcs = n * m
    target = n_nodes - 1
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    chosen = []

    def rec(e, cnt):
        if cnt == target:
            yield tuple(chosen)
            return
        if n_arcs - e < target - cnt:
            return
        i, j = divmod(e, m)
        ra = find(i)
        rb = find(n + j)
        if ra != rb:
            parent[ra] = rb
            chosen.append(e)
            yield from rec(e + 1, cnt + 1)
            chosen.pop()
            parent[ra] = ra
        yield from rec(e + 1, cnt)

    yield from rec(0, 0)


def _leaf_schedule(tree, n, m):
    """Leaf-elimination order (leaf node, other node, arc) fixing the tree flow."""
    n_nodes = n + m
    adj = [[] for _ in range(n_nodes)]
    for k in tree:
        i, j = divmod(k, m)
        adj[i].append((n + j, k))
        adj[n + j].append((i, k))
    deg = [len(a) for a in adj]
    used = set()
    queue = deque(a for a in range(n_nodes) if deg[a] == 1)
    steps = []
    while queue:
        a = queue.popleft()
        if deg[a] != 1:
            continue
        for b, k in adj[a]:
            if k not in used:
                used.add(k)
                steps.append((a, b, k))
                deg[a] -= 1
                deg[b] -= 1
                if deg[b] == 1:
                    queue.append(b)
                break
    return steps


def _schedule_chunks(n, m):
    """Yield leaf-elimination schedules for all trees, in arrays of <=_CHUNK."""
    steps = n + m - 1
    leaf = np.empty((_CHUNK, steps), dtype=np.int16)
    other = np.empty((_CHUNK, steps), dtype=np.int16)
    arc = np.empty((_CHUNK, steps), dtype=np.int16)
    fill = 0
    for tree in _enumerate_trees(n, m):
        sched = _leaf_schedule(tree, n, m)
        for s, (a, b, k) in enumerate(sched):
            leaf[fill, s] = a
            other[fill, s] = b
            arc[fill, s] = k
        fill += 1
        if fill == _CHUNK:
            yield leaf.copy(), other.copy(), arc.copy()
            fill = 0
    if fill:
        yield leaf[:fill].copy(), other[:fill].copy(), arc[:fill].copy()


@lru_cache(maxsize=32)
def _cached_schedules(n, m):
    chunks = list(_schedule_chunks(n, m))
    return tuple(chunks)


def _tree_count(n, m):
    return m ** (n - 1) * n ** (m - 1)


def _replay_chunk(leaf, other, arc, marg, finite_flat, isinf_flat):
    """Tree flows by leaf elimination, vectorized across one chunk of trees."""
    t_count, steps = leaf.shape
    rem = np.tile(marg, (t_count, 1))
    rows = np.arange(t_count)
    obj = np.zeros(t_count)
    feasible = np.ones(t_count, dtype=bool)
    inf_hit = np.zeros(t_count, dtype=bool)
    for s in range(steps):
        a = arc[:, s]
        f = rem[rows, leaf[:, s]]
        rem[rows, other[:, s]] -= f
        feasible &= f >= -MASS_EPS
        positive = f > MASS_EPS
        inf_hit |= positive & isinf_flat[a]
        obj += np.where(positive, f, 0.0) * finite_flat[a]
    vals = np.where(inf_hit, np.inf, obj)
    return float(np.where(feasible, vals, np.inf).min())


def brute_force_transport(p, q, cost) -> float:
    """Minimum transport cost by enumerating all basic solutions.

    Every vertex of the transportation polytope is the flow of some spanning
    tree of the bipartite grid graph, so scanning all trees and keeping the
    best feasible flow is an exact (exponential) oracle. Sizes above 6 are
    rejected; 6 itself is extremely slow and meant for desperation only.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise DimensionMismatch("cost table must be a matrix")
    n, m = cost.shape
    if n > 6 or m > 6:
        raise TooLarge(f"brute force supports at most 6 states, got {max(n, m)}")
    p, q = _check_marginals(p, q, cost.shape)
    marg = np.concatenate([p, q])
    flat = cost.reshape(-1)
    isinf_flat = np.isinf(flat)
    finite_flat = np.where(isinf_flat, 0.0, flat)
    if _tree_count(n, m) <= _CACHE_TREE_LIMIT:
        chunks = _cached_schedules(n, m)
    else:
        chunks = _schedule_chunks(n, m)
    best = math.inf
    for leaf, other, arc in chunks:
        best = min(best, _replay_chunk(leaf, other, arc, marg, finite_flat, isinf_flat))
    return best
