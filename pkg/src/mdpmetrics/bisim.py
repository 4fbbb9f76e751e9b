"""Bisimulation semimetrics for finite Markov decision processes.

The metric of interest is the unique fixed point of the contraction

    F(h)(s, s') = max_a ( |r(s,a) - r(s',a)| + c * K_h(P(s,a), P(s',a)) )

where ``K_h`` is the optimal-transport distance with ground cost ``h`` and
``c`` in (0, 1) is the transition discount. Iterating F from the zero
matrix converges geometrically, and the final residual certifies how far
the returned matrix can be from the true fixed point.

Also here: exact bisimulation partitions by signature refinement, the
consistency check between a partition and the metric's kernel, and the
stability bound comparing the metrics of two nearby models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import FiniteMdp, require_valid_mdp, reward_span, value_iteration
from .partition import Partition
from .transport import kantorovich_value, total_variation

__all__ = [
    "check_metric_matrix",
    "metric_bound",
    "metric_step",
    "FixedPointResult",
    "fixed_point_metric",
    "bisimulation_partition",
    "KernelReport",
    "kernel_check",
    "perturbation_bound",
    "value_lipschitz_check",
]


def check_metric_matrix(d, upper_bound: float | None = None, tol: float = 1e-9) -> list[str]:
    """Report every way ``d`` fails to be a bounded semimetric matrix.

    Checks shape, finiteness, nonnegativity, zero diagonal, symmetry, the
    triangle inequality, and (when given) the upper bound. Returns an empty
    list when all hold within ``tol``.
    """
    problems: list[str] = []
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        return ["metric must be a square matrix, got shape %s" % (d.shape,)]
    if not np.isfinite(d).all():
        return ["metric has non-finite entries"]
    if d.min() < -tol:
        problems.append("negative entry %.12g" % d.min())
    diag = float(np.abs(np.diag(d)).max()) if d.shape[0] else 0.0
    if diag > tol:
        problems.append("diagonal entry %.12g != 0" % diag)
    asym = float(np.abs(d - d.T).max())
    if asym > tol:
        problems.append("asymmetry %.12g" % asym)
    through = (d[:, :, None] + d[None, :, :]).min(axis=1)
    tri = float((d - through).max())
    if tri > tol:
        problems.append("triangle inequality violated by %.12g" % tri)
    if upper_bound is not None:
        over = float(d.max()) - upper_bound
        if over > tol:
            problems.append("entry exceeds bound %.12g by %.12g" % (upper_bound, over))
    return problems


def _check_discount(c: float) -> float:
    c = float(c)
    if not 0.0 < c < 1.0:
        raise ValueError("discount must lie in (0, 1), got %r" % c)
    return c


def metric_bound(mdp: FiniteMdp, c: float) -> float:
    """Upper bound span(r) / (1 - c) that the fixed point never exceeds."""
    c = _check_discount(c)
    return reward_span(mdp) / (1.0 - c)


def metric_step(mdp: FiniteMdp, c: float, h, *, validate: bool = True) -> np.ndarray:
    """One application of the metric operator F to the matrix ``h``.

    The result takes, for every state pair, the worst action's reward gap
    plus ``c`` times the transport distance between the two next-state
    distributions under ground cost ``h``.
    """
    c = _check_discount(c)
    h = np.asarray(h, dtype=float)
    if validate:
        require_valid_mdp(mdp)
        problems = check_metric_matrix(h)
        if problems:
            raise ValueError("bad input metric: " + "; ".join(problems))
    n = mdp.n_states
    if h.shape != (n, n):
        raise ValueError("metric shape %s does not match %d states" % (h.shape, n))
    gaps = np.abs(mdp.rewards[:, None, :] - mdp.rewards[None, :, :])
    out = np.zeros((n, n))
    for s in range(n):
        for t in range(s + 1, n):
            best = 0.0
            for a in range(mdp.n_actions):
                move = kantorovich_value(h, mdp.transitions[s, a], mdp.transitions[t, a])
                cand = gaps[s, t, a] + c * move
                if cand > best:
                    best = cand
            out[s, t] = best
            out[t, s] = best
    return out


@dataclass(frozen=True)
class FixedPointResult:
    """Outcome of iterating the metric operator to its fixed point.

    Attributes:
        metric: the final iterate, a semimetric matrix.
        iterations: number of operator applications performed.
        certified_error: rigorous bound on ``max |metric - true|``, equal to
            c / (1 - c) times the final residual.
        residuals: sup-norm change at every iteration, in order.
        trace: all iterates starting from the zero matrix when tracing was
            requested, else None.
    """

    metric: np.ndarray
    iterations: int
    certified_error: float
    residuals: np.ndarray
    trace: list[np.ndarray] | None = field(default=None, repr=False)


def fixed_point_metric(
    mdp: FiniteMdp,
    c: float,
    *,
    epsilon: float = 1e-6,
    record_trace: bool = False,
) -> FixedPointResult:
    """Iterate F from the zero matrix until the error certificate meets
    ``epsilon``.

    Stops once the sup-norm residual drops to ``epsilon * (1 - c) / c``,
    which pins the distance to the true fixed point at ``epsilon`` or less
    (geometric tail of a c-contraction). Iteration count is capped by the
    decay rate predicted from the first residual; exceeding the cap raises,
    since it means the contraction estimate failed.
    """
    require_valid_mdp(mdp)
    c = _check_discount(c)
    epsilon = float(epsilon)
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    threshold = epsilon * (1.0 - c) / c
    h = np.zeros((mdp.n_states, mdp.n_states))
    trace = [h.copy()] if record_trace else None
    residuals: list[float] = []
    max_iter: int | None = None
    while True:
        nxt = metric_step(mdp, c, h, validate=False)
        residual = float(np.abs(nxt - h).max())
        residuals.append(residual)
        h = nxt
        if trace is not None:
            trace.append(h.copy())
        if residual <= threshold:
            break
        if max_iter is None:
            # geometric decay from the first residual, plus slack
            max_iter = 16 + int(math.ceil(math.log(threshold / residual) / math.log(c)))
        if len(residuals) > max_iter:
            raise RuntimeError(
                "metric iteration exceeded its geometric budget (%d rounds)" % max_iter
            )
    certified = c / (1.0 - c) * residuals[-1]
    return FixedPointResult(
        metric=h,
        iterations=len(residuals),
        certified_error=certified,
        residuals=np.asarray(residuals),
        trace=trace,
    )


def bisimulation_partition(mdp: FiniteMdp, *, tol: float = 0.0) -> Partition:
    """Coarsest partition whose blocks have identical rewards and identical
    block-level transition masses for every action.

    Refines by signatures: two states stay together only if their rewards
    and their transition mass into every current block agree per action,
    within ``tol`` per component. ``tol = 0`` is the exact kernel; a small
    positive value absorbs floating-point noise in the model data.
    """
    require_valid_mdp(mdp)
    if tol < 0.0:
        raise ValueError("tol must be nonnegative")
    n = mdp.n_states
    labels = np.zeros(n, dtype=np.int64)
    n_blocks = 1
    for _ in range(n):
        onehot = np.zeros((n, n_blocks))
        onehot[np.arange(n), labels] = 1.0
        masses = np.tensordot(mdp.transitions, onehot, axes=([2], [0]))
        sig = np.concatenate(
            [mdp.rewards.reshape(n, -1), masses.reshape(n, -1)], axis=1
        )
        new_labels = np.empty(n, dtype=np.int64)
        next_id = 0
        for block in range(n_blocks):
            members = np.flatnonzero(labels == block)
            rows = sig[members]
            order = np.lexsort(rows.T[::-1])
            ids = np.empty(members.size, dtype=np.int64)
            rep = 0
            ids[order[0]] = next_id
            for k in range(1, order.size):
                # compare to the subgroup representative, not the neighbor,
                # so near-ties cannot drift across the tolerance
                if np.abs(rows[order[k]] - rows[order[rep]]).max() > tol:
                    rep = k
                    next_id += 1
                ids[order[k]] = next_id
            next_id += 1
            new_labels[members] = ids
        if next_id == n_blocks:
            break
        labels = new_labels
        n_blocks = next_id
    return Partition.from_labels(labels)


@dataclass(frozen=True)
class KernelReport:
    """How a partition compares against the kernel of a metric.

    Pairs are classified with two thresholds: distances at or below ``tol``
    count as zero, distances above ``10 * tol`` count as positive, and the
    band in between is indeterminate. A disagreement is a same-block pair
    with positive distance or a cross-block pair with zero distance.
    """

    tol: float
    same_block_max: float
    cross_block_min: float
    disagreements: tuple[tuple[int, int], ...]
    indeterminate: tuple[tuple[int, int], ...]

    @property
    def consistent(self) -> bool:
        """True when no pair disagrees and none is indeterminate."""
        return not self.disagreements and not self.indeterminate


def kernel_check(metric, partition: Partition, *, tol: float = 1e-9) -> KernelReport:
    """Compare a partition against the zero set of a semimetric.

    The partition matches the metric's kernel when states in a common block
    are at distance zero and states in different blocks are at positive
    distance. ``tol`` sets the resolution: metrics are usually computed
    iteratively, so exact zeros cannot be expected.
    """
    metric = np.asarray(metric, dtype=float)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = partition.n_states
    if metric.shape != (n, n):
        raise ValueError("metric shape %s does not match %d states" % (metric.shape, n))
    same_max = 0.0
    cross_min = math.inf
    disagreements: list[tuple[int, int]] = []
    indeterminate: list[tuple[int, int]] = []
    labels = partition.labels
    for s in range(n):
        for t in range(s + 1, n):
            d = metric[s, t]
            if labels[s] == labels[t]:
                same_max = max(same_max, d)
                if d > 10.0 * tol:
                    disagreements.append((s, t))
                elif d > tol:
                    indeterminate.append((s, t))
            else:
                cross_min = min(cross_min, d)
                if d <= tol:
                    disagreements.append((s, t))
                elif d <= 10.0 * tol:
                    indeterminate.append((s, t))
    return KernelReport(
        tol=tol,
        same_block_max=same_max,
        cross_block_min=float(cross_min),
        disagreements=tuple(disagreements),
        indeterminate=tuple(indeterminate),
    )


def perturbation_bound(
    mdp_a: FiniteMdp,
    mdp_b: FiniteMdp,
    c: float,
    *,
    epsilon: float = 1e-9,
) -> tuple[float, float]:
    """Observed metric deviation between two models and its a priori bound.

    For models on the same state and action sets, the fixed points satisfy

        max |d_a - d_b| <= 2/(1-c) * max |r_a - r_b|
                         + 2*B*c/(1-c)^2 * max_tv

    with ``B`` the larger reward span and ``max_tv`` the worst per-pair
    total variation between transition rows. Returns (observed, bound);
    the observed side carries up to ``2 * epsilon`` of iteration error.
    """
    require_valid_mdp(mdp_a)
    require_valid_mdp(mdp_b)
    c = _check_discount(c)
    if mdp_a.rewards.shape != mdp_b.rewards.shape:
        raise ValueError("models must share state and action counts")
    d_a = fixed_point_metric(mdp_a, c, epsilon=epsilon).metric
    d_b = fixed_point_metric(mdp_b, c, epsilon=epsilon).metric
    observed = float(np.abs(d_a - d_b).max())
    dr = float(np.abs(mdp_a.rewards - mdp_b.rewards).max())
    max_tv = 0.0
    for s in range(mdp_a.n_states):
        for a in range(mdp_a.n_actions):
            tv = total_variation(mdp_a.transitions[s, a], mdp_b.transitions[s, a])
            if tv > max_tv:
                max_tv = tv
    span = max(reward_span(mdp_a), reward_span(mdp_b))
    bound = 2.0 * dr / (1.0 - c) + 2.0 * span * c / (1.0 - c) ** 2 * max_tv
    return observed, bound


def value_lipschitz_check(
    mdp: FiniteMdp,
    gamma: float,
    c: float,
    metric,
    *,
    value_epsilon: float = 1e-9,
) -> float:
    """Worst violation of the value-function Lipschitz property.

    When ``gamma <= c`` the optimal values obey
    ``|V(s) - V(t)| <= d(s, t)``. Returns the largest ``|V(s) - V(t)| -
    d(s, t)`` over pairs; a nonpositive result (up to value-iteration and
    metric error) confirms the property. Raises when ``gamma > c`` because
    the guarantee does not apply there.
    """
    c = _check_discount(c)
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if gamma > c:
        raise ValueError("the Lipschitz bound needs gamma <= c")
    metric = np.asarray(metric, dtype=float)
    n = mdp.n_states
    if metric.shape != (n, n):
        raise ValueError("metric shape %s does not match %d states" % (metric.shape, n))
    values, _ = value_iteration(mdp, gamma, epsilon=value_epsilon)
    gaps = np.abs(values[:, None] - values[None, :])
    return float((gaps - metric).max())
