"""Finite Markov decision processes and discounted value iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ROW_SUM_TOL",
    "FiniteMdp",
    "validate_mdp",
    "require_valid_mdp",
    "normalize_rows",
    "reward_span",
    "value_iteration",
    "greedy_policy",
    "value_bounds",
    "check_value_vector",
]

# transition rows must sum to one within this tolerance
ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class FiniteMdp:
    """A finite MDP over one shared action set.

    Attributes:
        rewards: array of shape ``(n_states, n_actions)``.
        transitions: array of shape ``(n_states, n_actions, n_states)``;
            ``transitions[s, a]`` is the next-state distribution for taking
            action ``a`` in state ``s``.
        actions: one label per action column. Defaults to ``a0, a1, ...``.
    """

    rewards: np.ndarray
    transitions: np.ndarray
    actions: tuple = ()

    def __post_init__(self):
        rewards = np.array(self.rewards, dtype=float)
        transitions = np.array(self.transitions, dtype=float)
        if rewards.ndim != 2 or rewards.shape[0] < 1 or rewards.shape[1] < 1:
            raise ValueError("rewards must be a nonempty (n_states, n_actions) array")
        n, a = rewards.shape
        if transitions.shape != (n, a, n):
            raise ValueError(
                "transitions shape %s does not match (n_states, n_actions, n_states) = %s"
                % (transitions.shape, (n, a, n))
            )
        actions = tuple(str(label) for label in self.actions)
        if not actions:
            actions = tuple("a%d" % k for k in range(a))
        if len(actions) != a:
            raise ValueError("%d action labels given for %d actions" % (len(actions), a))
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "actions", actions)

    @property
    def n_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_actions(self) -> int:
        return self.rewards.shape[1]


def validate_mdp(mdp: FiniteMdp, row_sum_tol: float = ROW_SUM_TOL) -> list[str]:
    """Report every invariant violation of an MDP; empty means valid.

    Checks that rewards are finite and every transition row is nonnegative
    and sums to one within ``row_sum_tol``. Each entry names the offending
    state, action, and magnitude. Rows are never repaired here; see
    :func:`normalize_rows` for explicit renormalization.
    """
    problems = []
    bad = ~np.isfinite(mdp.rewards)
    if bad.any():
        for s, a in zip(*np.nonzero(bad)):
            problems.append("state %d action %d: reward is not finite" % (s, a))
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            row = mdp.transitions[s, a]
            if not np.isfinite(row).all():
                problems.append("state %d action %d: non-finite transition mass" % (s, a))
                continue
            low = row.min()
            if low < 0.0:
                problems.append(
                    "state %d action %d: negative mass %.12g" % (s, a, low)
                )
            total = row.sum()
            if abs(total - 1.0) > row_sum_tol:
                problems.append(
                    "state %d action %d: row sum %.12g != 1" % (s, a, total)
                )
    return problems


def require_valid_mdp(mdp: FiniteMdp, row_sum_tol: float = ROW_SUM_TOL) -> None:
    """Raise ``ValueError`` with the full violation report if the MDP is invalid."""
    problems = validate_mdp(mdp, row_sum_tol)
    if problems:
        raise ValueError("invalid MDP: " + "; ".join(problems))


def normalize_rows(mdp: FiniteMdp) -> FiniteMdp:
    """Return a copy with every transition row rescaled to sum to one.

    Rows with nonpositive total mass cannot be rescaled and raise
    ``ValueError``.
    """
    totals = mdp.transitions.sum(axis=2)
    if (totals <= 0.0).any():
        s, a = [int(v[0]) for v in np.nonzero(totals <= 0.0)]
        raise ValueError("state %d action %d: row mass %.12g cannot be normalized" % (s, a, totals[s, a]))
    return FiniteMdp(mdp.rewards, mdp.transitions / totals[:, :, None], mdp.actions)


def reward_span(mdp: FiniteMdp) -> float:
    """Largest within-action reward gap, max over actions of (max - min) across states."""
    per_action = mdp.rewards.max(axis=0) - mdp.rewards.min(axis=0)
    return float(per_action.max())


def value_iteration(mdp: FiniteMdp, gamma: float, epsilon: float):
    """Iterate the Bellman optimality backup from zero to epsilon accuracy.

    Stops once successive iterates differ by at most
    ``epsilon * (1 - gamma) / gamma`` in max norm, which certifies
    ``||V - V*||_inf <= epsilon`` through the gamma contraction rate of the
    backup.

    Args:
        mdp: a valid finite MDP.
        gamma: discount in (0, 1).
        epsilon: requested max-norm accuracy, positive.

    Returns:
        ``(values, iterations)`` where ``iterations`` counts backups applied.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("discount must lie in (0, 1), got %r" % (gamma,))
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive, got %r" % (epsilon,))
    require_valid_mdp(mdp)
    threshold = epsilon * (1.0 - gamma) / gamma
    values = np.zeros(mdp.n_states)
    iterations = 0
    cap = None
    while True:
        iterations += 1
        backed = mdp.rewards + gamma * np.einsum("san,n->sa", mdp.transitions, values)
        new_values = backed.max(axis=1)
        residual = float(np.max(np.abs(new_values - values)))
        values = new_values
        if residual <= threshold:
            return values, iterations
        if cap is None:
            # geometric decay of the residual caps the iteration count
            cap = int(np.ceil(np.log(threshold / residual) / np.log(gamma))) + 16
        if iterations > cap:
            raise RuntimeError("value iteration failed to contract")


def greedy_policy(mdp: FiniteMdp, values: np.ndarray, gamma: float) -> np.ndarray:
    """One-step lookahead policy for a value vector.

    Ties resolve to the lowest action index. Returns an integer array of
    action indices, one per state.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("discount must lie in (0, 1), got %r" % (gamma,))
    values = np.asarray(values, dtype=float)
    if values.shape != (mdp.n_states,):
        raise ValueError("value vector length %s does not match %d states" % (values.shape, mdp.n_states))
    if not np.isfinite(values).all():
        raise ValueError("value vector has non-finite entries")
    backed = mdp.rewards + gamma * np.einsum("san,n->sa", mdp.transitions, values)
    return np.argmax(backed, axis=1)


def value_bounds(mdp: FiniteMdp, gamma: float) -> tuple[float, float]:
    """Range ``[min_r / (1 - gamma), max_r / (1 - gamma)]`` containing the optimal values."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("discount must lie in (0, 1), got %r" % (gamma,))
    return (
        float(mdp.rewards.min() / (1.0 - gamma)),
        float(mdp.rewards.max() / (1.0 - gamma)),
    )


def check_value_vector(values, mdp: FiniteMdp, gamma: float, tol: float = 0.0) -> list[str]:
    """Report violations of the value-vector contract; empty means clean.

    A value vector must have one finite entry per state, inside the
    discounted reward range widened by ``tol`` (solver accuracy).
    """
    problems = []
    values = np.asarray(values, dtype=float)
    if values.shape != (mdp.n_states,):
        return ["value vector shape %s does not match %d states" % (values.shape, mdp.n_states)]
    if not np.isfinite(values).all():
        problems.append("value vector has non-finite entries")
        return problems
    low, high = value_bounds(mdp, gamma)
    if values.min() < low - tol:
        problems.append("value %.12g below lower bound %.12g" % (values.min(), low))
    if values.max() > high + tol:
        problems.append("value %.12g above upper bound %.12g" % (values.max(), high))
    return problems
