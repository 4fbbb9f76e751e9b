"""A continuous-state test model on [0, 1] with closed-form answers.

The model: states x in [0, 1], two actions. Action ``a`` pays ``1 - x`` and
redistributes uniformly over [0, 1]; action ``b`` pays ``x`` and stays
put. Discretizing onto n equal cells (rewards at cell centers, the uniform
action giving mass 1/n to every cell, the stay action a self-loop) produces
a finite MDP whose metric and optimal values are known exactly, which makes
the family a sharp end-to-end test for the solvers.

Closed forms used as oracles:

* metric: d(x, y) = |x - y| / (1 - c). On the n-cell model this is exactly
  the fixed point evaluated at cell centers, with no discretization gap.
* optimal value: below a switch point the uniform action is optimal and
  V(x) = 1 - x + g*m with m the mean of V; above it the stay action is
  optimal and V(x) = x / (1 - g). Self-consistency (the switch point is
  where the two branches cross, and m must equal the integral of V) pins

      x0 = 1 / (1 + s),   s = sqrt(1 - g)
      m  = (1 + s + s^2) / (s^2 * (1 + s)^2)

  as the unique solution; see :func:`toy_value_closed_form`. The n-cell
  model's values converge to this at O(1/n^2) (the cell-averaged mean of V
  differs from the true integral by the usual midpoint-rule bias), so
  center values agree with the closed form only up to that bias, while the
  metric agrees exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bisim import fixed_point_metric
from .mdp import FiniteMdp, value_iteration

__all__ = [
    "ToySpec",
    "toy_mdp",
    "toy_centers",
    "toy_metric_closed_form",
    "toy_value_switch_point",
    "toy_value_mean",
    "toy_value_closed_form",
    "ConvergenceRow",
    "convergence_experiment",
]


@dataclass(frozen=True)
class ToySpec:
    """Grid resolution and discounts for the discretized model."""

    n: int
    gamma: float = 0.5
    c: float = 0.5

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must lie in (0, 1)")


def toy_centers(n: int) -> np.ndarray:
    """Centers (2k + 1) / (2n) of the n equal cells of [0, 1]."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    return (2.0 * np.arange(n) + 1.0) / (2.0 * n)


def toy_mdp(spec: ToySpec) -> FiniteMdp:
    """The n-cell discretization as a finite MDP.

    Rewards are the cell-center values of ``1 - x`` (action ``a``) and ``x``
    (action ``b``); action ``a`` moves uniformly over all cells and action
    ``b`` self-loops.
    """
    n = spec.n
    centers = toy_centers(n)
    rewards = np.stack([1.0 - centers, centers], axis=1)
    transitions = np.empty((n, 2, n))
    transitions[:, 0, :] = 1.0 / n
    transitions[:, 1, :] = np.eye(n)
    return FiniteMdp(rewards=rewards, transitions=transitions, actions=("a", "b"))


def _check_unit(name: str, x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError("%s must lie in [0, 1], got %r" % (name, x))
    return x


def toy_metric_closed_form(x: float, y: float, c: float) -> float:
    """Exact metric d(x, y) = |x - y| / (1 - c) of the continuous model.

    Check that it is a fixed point: for states x, y the worst action is the
    stay action (reward gap |x - y|, next states again x and y at ground
    distance d(x, y)), giving d = |x - y| + c * d; the uniform action ties
    on the reward gap but moves both states to the same distribution.
    """
    x = _check_unit("x", x)
    y = _check_unit("y", y)
    c = float(c)
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    return abs(x - y) / (1.0 - c)


def toy_value_switch_point(gamma: float) -> float:
    """Point x0 = 1 / (1 + sqrt(1 - gamma)) where the optimal action flips
    from the uniform action to the stay action."""
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    return 1.0 / (1.0 + math.sqrt(1.0 - gamma))


def toy_value_mean(gamma: float) -> float:
    """Mean m of the optimal value over [0, 1].

    With ``s = sqrt(1 - gamma)``: m = (1 + s + s^2) / (s^2 * (1 + s)^2).
    Solves the self-consistency equation obtained by integrating the value
    over both branches:

        m = integral_0^x0 (1 - x + gamma*m) dx + integral_x0^1 x/(1-gamma) dx
    """
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    s = math.sqrt(1.0 - gamma)
    return (1.0 + s + s * s) / (s * s * (1.0 + s) ** 2)


def toy_value_closed_form(x: float, gamma: float) -> float:
    """Optimal value of the continuous model.

        V(x) = 1 - x + gamma * m   for x < x0
        V(x) = x / (1 - gamma)     for x >= x0

    with x0 and m from :func:`toy_value_switch_point` and
    :func:`toy_value_mean`. The two branches meet at x0, where both equal
    x0 / (1 - gamma), and the pair (x0, m) is the unique one making V
    satisfy its own optimality equation

        V(x) = max(1 - x + gamma * integral(V), x + gamma * V(x)).

    Any other switch point or mean fails the integral identity; in
    particular a switch at 1/2 with continuation gamma/(2(1-gamma)) is not
    self-consistent for any gamma (its integral differs from its assumed
    mean by 3/8 at gamma = 1/2).
    """
    x = _check_unit("x", x)
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    x0 = toy_value_switch_point(gamma)
    if x < x0:
        return 1.0 - x + gamma * toy_value_mean(gamma)
    return x / (1.0 - gamma)


@dataclass(frozen=True)
class ConvergenceRow:
    """Deviations of one grid size from the continuous closed forms.

    ``max_metric_dev`` compares the computed fixed-point metric at cell
    centers against the metric closed form (should sit below the iteration
    certificate). ``max_value_dev`` compares computed optimal values at
    centers against the value closed form (carries the O(1/n^2) mean bias).
    ``certified_bound`` is the within-cell value spread bound 1/(n(1-gamma)).
    """

    n: int
    max_metric_dev: float
    max_value_dev: float
    certified_bound: float


def convergence_experiment(
    ns,
    c: float = 0.5,
    gamma: float = 0.5,
    *,
    metric_epsilon: float = 1e-6,
    value_epsilon: float = 1e-9,
) -> list[ConvergenceRow]:
    """Run the grid-refinement study for each cell count in ``ns``.

    Requires ``gamma <= c`` so the metric bounds apply to values. For each
    n this computes the fixed-point metric and the optimal values of the
    n-cell model and measures the worst center deviation from the two
    closed forms.
    """
    gamma = float(gamma)
    c = float(c)
    if not 0.0 < gamma < 1.0 or not 0.0 < c < 1.0:
        raise ValueError("discounts must lie in (0, 1)")
    if gamma > c:
        raise ValueError("the experiment needs gamma <= c")
    rows: list[ConvergenceRow] = []
    for n in ns:
        spec = ToySpec(int(n), gamma=gamma, c=c)
        mdp = toy_mdp(spec)
        centers = toy_centers(spec.n)
        metric = fixed_point_metric(mdp, c, epsilon=metric_epsilon).metric
        closed_metric = np.abs(centers[:, None] - centers[None, :]) / (1.0 - c)
        metric_dev = float(np.abs(metric - closed_metric).max())
        values, _ = value_iteration(mdp, gamma, epsilon=value_epsilon)
        closed_values = np.array([toy_value_closed_form(x, gamma) for x in centers])
        value_dev = float(np.abs(values - closed_values).max())
        rows.append(
            ConvergenceRow(
                n=spec.n,
                max_metric_dev=metric_dev,
                max_value_dev=value_dev,
                certified_bound=1.0 / (spec.n * (1.0 - gamma)),
            )
        )
    return rows
