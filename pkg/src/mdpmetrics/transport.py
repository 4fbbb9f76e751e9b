"""Exact optimal transport between distributions on a finite common support.

The primal problem is solved with a successive-shortest-path min-cost flow
on the bipartite transportation graph, which is exact up to floating-point
rounding. A dual witness is recovered from the final node potentials and
re-verified after the fact, so every call returns a primal plan and a
matching dual certificate instead of a bare number.

A brute-force solver that enumerates every basic feasible solution of the
transportation polytope (spanning trees of the complete bipartite graph) is
included for cross-checking on tiny supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .partition import Partition

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "TransportResult",
    "check_distribution",
    "check_cost_matrix",
    "kantorovich",
    "kantorovich_value",
    "brute_force_kantorovich",
    "total_variation",
    "quotient_total_variation",
]

# remaining unrouted mass below this level counts as fully routed
_MASS_EPS = 1e-14
# flow entries below this level are dropped from the residual graph
_FLOW_EPS = 1e-15


@dataclass(frozen=True)
class Tolerances:
    """Numeric acceptance thresholds shared by the transport routines.

    Attributes:
        feasibility: allowed marginal and Lipschitz slack in returned
            certificates.
        duality_gap: allowed gap between the primal cost and the dual value.
        mass_mismatch: largest allowed difference between the two input
            masses.
        distribution_sum: how far a probability vector may sum from one.
        triangle: allowed triangle-inequality slack in cost matrices.
    """

    feasibility: float = 1e-9
    duality_gap: float = 1e-9
    mass_mismatch: float = 1e-9
    distribution_sum: float = 1e-12
    triangle: float = 1e-9


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class TransportResult:
    """Optimal value with its primal plan and dual potential.

    ``plan[i, j]`` is the mass moved from support point ``i`` of the first
    distribution to point ``j`` of the second. ``potentials`` is a vector
    ``f`` that is 1-Lipschitz with respect to the cost and attains
    ``value = f . (p - q)``.
    """

    value: float
    plan: np.ndarray
    potentials: np.ndarray


def check_distribution(p, *, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Coerce to a float vector and reject anything that is not a probability
    distribution (nonnegative, sums to one within tolerance)."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("distribution must be a nonempty 1-D array")
    if not np.isfinite(p).all():
        raise ValueError("distribution has non-finite entries")
    if p.min() < 0.0:
        raise ValueError("distribution has negative mass %.12g" % p.min())
    total = p.sum()
    if abs(total - 1.0) > tolerances.distribution_sum:
        raise ValueError("distribution sums to %.12g, not 1" % total)
    return p


def check_cost_matrix(cost, *, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Coerce to a float matrix and reject anything that is not a semimetric
    cost: square, nonnegative, zero diagonal, symmetric, triangle inequality
    within the configured slack."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1] or cost.shape[0] < 1:
        raise ValueError("cost must be a square matrix")
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix has non-finite entries")
    if cost.min() < 0.0:
        raise ValueError("cost matrix has negative entry %.12g" % cost.min())
    tol = tolerances.triangle
    if np.abs(np.diag(cost)).max() > tol:
        raise ValueError("cost matrix diagonal is not zero")
    if np.abs(cost - cost.T).max() > tol:
        raise ValueError("cost matrix is not symmetric")
    through = (cost[:, :, None] + cost[None, :, :]).min(axis=1)
    worst = float((cost - through).max())
    if worst > tol:
        raise ValueError("cost matrix violates the triangle inequality by %.12g" % worst)
    return cost


@njit(cache=True)
def _ssp_kernel(cost, supply, demand):  # pragma: no cover - exercised via wrappers
    """Successive shortest paths on the bipartite transportation graph.

    Sources are nodes 0..n-1, sinks n..n+m-1. Dijkstra runs on reduced
    costs under Johnson potentials, so all arc weights stay nonnegative.
    Returns (flow, potentials, status) with status 0 on success.
    """
    n = supply.shape[0]
    m = demand.shape[0]
    size = n + m
    flow = np.zeros((n, m))
    pot = np.zeros(size)
    excess = supply.copy()
    deficit = demand.copy()
    total_s = 0.0
    for i in range(n):
        total_s += excess[i]
    total_d = 0.0
    for j in range(m):
        total_d += deficit[j]
    remaining = min(total_s, total_d)

    dist = np.empty(size)
    parent = np.empty(size, np.int64)
    settled = np.empty(size, np.bool_)
    max_rounds = 8 * size * size + 64
    rounds = 0
    while remaining > _MASS_EPS:
        rounds += 1
        if rounds > max_rounds:
            return flow, pot, 1
        for v in range(size):
            dist[v] = np.inf
            parent[v] = -1
            settled[v] = False
        for i in range(n):
            if excess[i] > _MASS_EPS:
                dist[i] = 0.0
        target = -1
        while True:
            u = -1
            du = np.inf
            for v in range(size):
                if not settled[v] and dist[v] < du:
                    du = dist[v]
                    u = v
            if u < 0:
                break
            settled[u] = True
            if u >= n and deficit[u - n] > _MASS_EPS:
                target = u
                break
            if u < n:
                pu = pot[u]
                for j in range(m):
                    v = n + j
                    if settled[v]:
                        continue
                    w = cost[u, j] + pu - pot[v]
                    if w < 0.0:
                        w = 0.0
                    nd = du + w
                    if nd < dist[v]:
                        dist[v] = nd
                        parent[v] = u
            else:
                j = u - n
                pu = pot[u]
                for i in range(n):
                    if settled[i] or flow[i, j] <= 0.0:
                        continue
                    w = pu - cost[i, j] - pot[i]
                    if w < 0.0:
                        w = 0.0
                    nd = du + w
                    if nd < dist[i]:
                        dist[i] = nd
                        parent[i] = u
        if target < 0:
            # nothing with deficit is reachable; only mass dust remains
            break
        dt = dist[target]
        for v in range(size):
            dv = dist[v]
            if dv < dt:
                pot[v] += dv
            else:
                pot[v] += dt
        # walk back to the root source, finding the bottleneck
        delta = deficit[target - n]
        node = target
        while parent[node] >= 0:
            up = parent[node]
            if node < n:
                f = flow[node, up - n]
                if f < delta:
                    delta = f
            node = up
        if excess[node] < delta:
            delta = excess[node]
        if delta <= 0.0:
            return flow, pot, 2
        node = target
        while parent[node] >= 0:
            up = parent[node]
            if node >= n:
                flow[up, node - n] += delta
            else:
                f = flow[node, up - n] - delta
                if f < _FLOW_EPS:
                    f = 0.0
                flow[node, up - n] = f
            node = up
        excess[node] -= delta
        deficit[target - n] -= delta
        remaining -= delta
    return flow, pot, 0


def _solve_flow(cost, p, q):
    cost = np.ascontiguousarray(cost, dtype=float)
    p = np.ascontiguousarray(p, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    flow, pot, status = _ssp_kernel(cost, p, q)
    if status != 0:
        raise RuntimeError("transport solver failed to converge (status %d)" % status)
    return flow, pot


def _verify_certificate(cost, p, q, plan, potentials, value, tolerances):
    feas = tolerances.feasibility
    if plan.min() < -feas:
        raise RuntimeError("transport plan has negative mass %.3e" % plan.min())
    row_err = float(np.abs(plan.sum(axis=1) - p).max())
    col_err = float(np.abs(plan.sum(axis=0) - q).max())
    if max(row_err, col_err) > feas:
        raise RuntimeError(
            "transport plan marginals off by %.3e" % max(row_err, col_err)
        )
    slack = potentials[:, None] - potentials[None, :] - cost
    lip_err = float(slack.max())
    if lip_err > feas:
        raise RuntimeError("dual potential breaks the cost Lipschitz bound by %.3e" % lip_err)
    dual = float(potentials @ (p - q))
    if abs(value - dual) > tolerances.duality_gap:
        raise RuntimeError("duality gap %.3e exceeds tolerance" % abs(value - dual))


def kantorovich(
    cost,
    p,
    q,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    validate: bool = True,
) -> TransportResult:
    """Exact optimal-transport distance between two distributions.

    Solves ``min sum(plan * cost)`` over couplings of ``p`` and ``q`` and
    recovers a dual potential ``f`` with ``f . (p - q)`` equal to the primal
    cost. Support points with zero probability are kept, not pruned, so the
    plan and potential always line up with the input indexing.

    Args:
        cost: square semimetric cost matrix over the common support.
        p, q: probability vectors on that support.
        tolerances: numeric thresholds used for validation and the
            certificate check.
        validate: skip input validation when False (trusted callers).

    Returns:
        :class:`TransportResult` with value, plan, and potentials.

    Raises:
        ValueError: malformed inputs (bad shapes, non-semimetric cost,
            mass mismatch above ``tolerances.mass_mismatch``).
        RuntimeError: the solver produced a plan or potential that fails its
            own certificate, which indicates a solver defect.
    """
    if validate:
        cost = check_cost_matrix(cost, tolerances=tolerances)
        p = check_distribution(p, tolerances=tolerances)
        q = check_distribution(q, tolerances=tolerances)
    else:
        cost = np.asarray(cost, dtype=float)
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.shape[0] != cost.shape[0]:
        raise ValueError("cost and distributions must share one support size")
    if abs(p.sum() - q.sum()) > tolerances.mass_mismatch:
        raise ValueError(
            "mass mismatch %.3e between the two distributions" % abs(p.sum() - q.sum())
        )
    if np.array_equal(p, q):
        # equal inputs ship on the diagonal at zero cost
        plan = np.diag(p)
        potentials = np.zeros(p.shape[0])
        return TransportResult(0.0, plan, potentials)
    plan, pot = _solve_flow(cost, p, q)
    n = p.shape[0]
    # tightest Lipschitz potential dominated by the sink prices
    potentials = (cost - pot[n:][None, :]).min(axis=1)
    value = float(np.sum(plan * cost))
    _verify_certificate(cost, p, q, plan, potentials, value, tolerances)
    return TransportResult(value, plan, potentials)


def kantorovich_value(cost, p, q) -> float:
    """Optimal-transport cost only, for trusted inner loops.

    Skips input validation and certificate assembly but solves with the same
    flow kernel as :func:`kantorovich`. Equal inputs and pairs of point
    masses are resolved exactly without a solver call.
    """
    if np.array_equal(p, q):
        return 0.0
    nz_p = np.nonzero(p)[0]
    if nz_p.size == 1:
        nz_q = np.nonzero(q)[0]
        if nz_q.size == 1:
            # all mass moves along one arc
            return float(p[nz_p[0]] * cost[nz_p[0], nz_q[0]])
    flow, _ = _solve_flow(cost, p, q)
    return float(np.sum(flow * cost))


@lru_cache(maxsize=None)
def _tree_tables(m: int, n: int):
    """Tables describing every spanning tree of the complete bipartite graph
    K_{m,n}, which index every basic feasible solution of the m-by-n
    transportation polytope.

    Trees are encoded by parent pointers toward row node 0: every column
    node picks a row parent and every row node except the root picks a
    column parent, and exactly the pointer tables whose chains all reach the
    root are trees. For each tree edge the tables hold its (row, column)
    endpoints, the orientation sign of its subtree cut, and bitmasks of the
    rows and columns inside the subtree hanging below the edge.
    """
    size = m + n
    edges = size - 1
    col_parents = np.indices((m,) * n).reshape(n, -1).T      # (m^n, n)
    if m > 1:
        row_parents = np.indices((n,) * (m - 1)).reshape(m - 1, -1).T
    else:
        row_parents = np.zeros((1, 0), dtype=np.int64)
    reps = col_parents.shape[0]
    par = np.zeros((row_parents.shape[0] * reps, size), dtype=np.int16)
    par[:, 1:m] = np.repeat(row_parents + m, reps, axis=0)
    par[:, m:] = np.tile(col_parents, (row_parents.shape[0], 1))

    hop = par.copy()
    for _ in range(int(np.ceil(np.log2(size))) + 1):
        hop = np.take_along_axis(hop, hop, axis=1)
    par = par[(hop == 0).all(axis=1)]
    count = par.shape[0]
    if count != m ** (n - 1) * n ** (m - 1):
        raise AssertionError("spanning tree enumeration miscounted")

    member = np.zeros((count, size, size), dtype=bool)
    rows_idx = np.arange(count)[:, None]
    cols_idx = np.arange(size)[None, :]
    cursor = np.broadcast_to(np.arange(size, dtype=np.int16), (count, size)).copy()
    for _ in range(size):
        member[rows_idx, cols_idx, cursor] = True
        cursor = np.take_along_axis(par, cursor, axis=1)

    children = np.arange(1, size)
    child_parent = par[:, 1:].astype(np.int64)
    child_is_col = children >= m
    edge_row = np.where(child_is_col[None, :], child_parent, children[None, :])
    edge_col = np.where(child_is_col[None, :], children[None, :] - m, child_parent - m)
    # subtree below a column child imports mass, below a row child exports it
    sign = np.where(child_is_col, 1.0, -1.0)

    subtree = member[:, :, 1:]
    row_bits = np.zeros((count, edges), dtype=np.uint32)
    for i in range(m):
        row_bits |= subtree[:, i, :].astype(np.uint32) << np.uint32(i)
    col_bits = np.zeros((count, edges), dtype=np.uint32)
    for j in range(n):
        col_bits |= subtree[:, m + j, :].astype(np.uint32) << np.uint32(j)
    return (
        edge_row.astype(np.int64),
        edge_col.astype(np.int64),
        sign,
        row_bits,
        col_bits,
    )


def _subset_sums(vec: np.ndarray) -> np.ndarray:
    masks = np.arange(1 << vec.shape[0], dtype=np.uint32)
    bits = (masks[:, None] >> np.arange(vec.shape[0], dtype=np.uint32)) & 1
    return bits.astype(float) @ vec


def brute_force_kantorovich(cost, p, q, *, max_support: int = 5) -> float:
    """Exact transport cost by enumerating every vertex of the polytope.

    Intended as an independent oracle on tiny supports; the flow and
    LP machinery in :func:`kantorovich` is not used here. Supports larger
    than ``max_support`` are rejected because the tree tables grow as
    ``m**(n-1) * n**(m-1)``.
    """
    cost = np.asarray(cost, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if cost.ndim != 2 or cost.shape != (p.shape[0], q.shape[0]):
        raise ValueError("cost shape must match the two support sizes")
    m, n = cost.shape
    if m > max_support or n > max_support:
        raise ValueError("support too large for brute force (limit %d)" % max_support)
    edge_row, edge_col, sign, row_bits, col_bits = _tree_tables(m, n)
    p_sums = _subset_sums(p)
    q_sums = _subset_sums(q)
    flows = sign[None, :] * (q_sums[col_bits] - p_sums[row_bits])
    feasible = (flows >= -1e-12).all(axis=1)
    if not feasible.any():
        raise RuntimeError("no feasible vertex found; marginals do not balance")
    totals = np.einsum("te,te->t", flows, cost[edge_row, edge_col])
    return float(totals[feasible].min())


def total_variation(p, q) -> float:
    """Total variation distance, half the L1 distance between the vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must share a support")
    return float(0.5 * np.abs(p - q).sum())


def quotient_total_variation(p, q, partition: Partition) -> float:
    """Total variation between the block marginals of a partition.

    Equals the largest discrepancy ``|p(X) - q(X)|`` over unions of blocks,
    and the transport distance under the block-discrete cost.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.shape[0] != partition.n_states:
        raise ValueError("distributions must match the partitioned state count")
    p_blocks = np.bincount(partition.labels, weights=p, minlength=partition.n_blocks)
    q_blocks = np.bincount(partition.labels, weights=q, minlength=partition.n_blocks)
    return float(0.5 * np.abs(p_blocks - q_blocks).sum())
