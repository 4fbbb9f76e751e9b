"""Command-line front end.

Subcommands wire the library to JSON model files and deterministic text
output: ``validate`` (model file checks), ``solve`` (optimal values plus a
greedy policy), ``metric`` (fixed-point metric table with its error
certificate), ``aggregate`` (metric-guided quotient plus a CSV report),
``toy`` (the grid-model convergence study), and ``perturb`` (two-model
stability bound).

Exit codes: 0 success, 1 domain failure (invalid model, bad parameter,
solver failure), 2 file or parse failure. All numeric output is fixed at 9
decimal places so identical inputs produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .aggregation import aggregation_report, epsilon_partition, quotient_mdp
from .bisim import fixed_point_metric, perturbation_bound
from .mdp import FiniteMdp, greedy_policy, require_valid_mdp, validate_mdp, value_iteration
from .toy import ToySpec, convergence_experiment, toy_mdp
from . import __version__

FORMAT_VERSION = 1

__all__ = [
    "FORMAT_VERSION",
    "MdpDocumentError",
    "load_mdp_document",
    "save_mdp_document",
    "main",
    "entry",
]


class MdpDocumentError(Exception):
    """Raised when a model file cannot be parsed into a model at all.

    Distinct from semantic validity: a structurally sound file describing a
    non-stochastic matrix parses fine and fails validation instead.
    """


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise MdpDocumentError(message)


def load_mdp_document(path) -> tuple[FiniteMdp, list[str] | None]:
    """Read a model document; returns the model and optional state labels.

    The model is not semantically validated here, so callers can distinguish
    parse failures (raised as :class:`MdpDocumentError`) from stochasticity
    violations (reported by ``validate_mdp``).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MdpDocumentError("%s: not valid JSON (%s)" % (path, exc)) from exc
    _require(isinstance(doc, dict), "document must be a JSON object")
    _require(doc.get("format_version") == FORMAT_VERSION,
             "format_version must be %d" % FORMAT_VERSION)
    for key in ("n_states", "actions", "rewards", "transitions"):
        _require(key in doc, "missing key %r" % key)
    n = doc["n_states"]
    actions = doc["actions"]
    _require(isinstance(n, int) and n >= 1, "n_states must be a positive integer")
    _require(isinstance(actions, list) and len(actions) >= 1
             and all(isinstance(a, str) for a in actions),
             "actions must be a nonempty list of strings")
    try:
        rewards = np.asarray(doc["rewards"], dtype=float)
        transitions = np.asarray(doc["transitions"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MdpDocumentError("rewards/transitions are not numeric arrays") from exc
    _require(rewards.shape == (n, len(actions)),
             "rewards must have shape [n_states][n_actions]")
    _require(transitions.shape == (n, len(actions), n),
             "transitions must have shape [n_states][n_actions][n_states]")
    labels = doc.get("state_labels")
    if labels is not None:
        _require(isinstance(labels, list) and len(labels) == n
                 and all(isinstance(s, str) for s in labels),
                 "state_labels must list one string per state")
    mdp = FiniteMdp(rewards=rewards, transitions=transitions, actions=tuple(actions))
    return mdp, labels


def save_mdp_document(path, mdp: FiniteMdp, state_labels: list[str] | None = None) -> None:
    """Write a model document. Floats round-trip exactly through JSON."""
    doc = {
        "format_version": FORMAT_VERSION,
        "n_states": mdp.n_states,
        "actions": list(mdp.actions),
        "rewards": mdp.rewards.tolist(),
        "transitions": mdp.transitions.tolist(),
    }
    if state_labels is not None:
        doc["state_labels"] = state_labels
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _check_unit_interval(name: str, value: float) -> float:
    if not 0.0 < value < 1.0:
        raise ValueError("%s must lie in (0, 1), got %g" % (name, value))
    return float(value)


def cmd_validate(args) -> int:
    mdp, _ = load_mdp_document(args.file)
    problems = validate_mdp(mdp)
    if problems:
        for line in problems:
            print(line)
        return 1
    print("ok")
    return 0


def cmd_solve(args) -> int:
    mdp, labels = load_mdp_document(args.file)
    require_valid_mdp(mdp)
    gamma = _check_unit_interval("discount", args.discount)
    values, _ = value_iteration(mdp, gamma, epsilon=args.epsilon)
    policy = greedy_policy(mdp, values, gamma)
    for s in range(mdp.n_states):
        name = labels[s] if labels else str(s)
        print("%s %.9f %s" % (name, values[s], mdp.actions[policy[s]]))
    return 0


def cmd_metric(args) -> int:
    mdp, _ = load_mdp_document(args.file)
    require_valid_mdp(mdp)
    c = _check_unit_interval("metric discount", args.metric_discount)
    result = fixed_point_metric(mdp, c, epsilon=args.epsilon)
    for row in result.metric:
        print(" ".join("%.9f" % v for v in row))
    print("certified_error <= %.9f" % result.certified_error)
    return 0


def cmd_aggregate(args) -> int:
    mdp, _ = load_mdp_document(args.file)
    require_valid_mdp(mdp)
    gamma = _check_unit_interval("discount", args.discount)
    c = _check_unit_interval("metric discount", args.metric_discount)
    if args.epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    fp = fixed_point_metric(mdp, c, epsilon=args.metric_epsilon)
    partition = epsilon_partition(fp.metric, args.epsilon)
    report = aggregation_report(mdp, partition, gamma, c, args.metric_epsilon)
    if args.output:
        save_mdp_document(args.output, quotient_mdp(mdp, partition))
    print("block,size,diameter,value_spread_bound")
    for block, size, diameter, bound in report.rows():
        print("%d,%d,%.9f,%.9f" % (block, size, diameter, bound))
    print("# max_diameter %.9f" % report.max_diameter)
    print("# empirical_value_error %.9f" % report.empirical_value_error)
    print("# certified_metric_error %.9f" % report.certified_metric_error)
    return 0


def cmd_toy(args) -> int:
    gamma = _check_unit_interval("discount", args.discount)
    c = _check_unit_interval("metric discount", args.metric_discount)
    if args.output:
        save_mdp_document(args.output, toy_mdp(ToySpec(args.n[0], gamma=gamma, c=c)))
    rows = convergence_experiment(args.n, c=c, gamma=gamma, metric_epsilon=args.epsilon)
    print("n,max_metric_dev,max_value_dev,certified_bound")
    for row in rows:
        print("%d,%.9f,%.9f,%.9f"
              % (row.n, row.max_metric_dev, row.max_value_dev, row.certified_bound))
    return 0


def cmd_perturb(args) -> int:
    mdp_a, _ = load_mdp_document(args.file)
    mdp_b, _ = load_mdp_document(args.other)
    require_valid_mdp(mdp_a)
    require_valid_mdp(mdp_b)
    c = _check_unit_interval("metric discount", args.metric_discount)
    observed, bound = perturbation_bound(mdp_a, mdp_b, c, epsilon=args.epsilon)
    print("lhs %.9f" % observed)
    print("rhs %.9f" % bound)
    print("PASS" if observed <= bound + 2.0 * args.epsilon else "FAIL")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdpmetrics",
        description="Bisimulation metrics, exact transport, and aggregation "
                    "for finite MDPs.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="optimal values and a greedy policy")
    p.add_argument("file")
    p.add_argument("--discount", "-g", type=float, required=True)
    p.add_argument("--epsilon", "-e", type=float, default=1e-9,
                   help="value accuracy (default 1e-9)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("metric", help="fixed-point metric table")
    p.add_argument("file")
    p.add_argument("--metric-discount", "-c", type=float, required=True)
    p.add_argument("--epsilon", "-e", type=float, default=1e-6,
                   help="certified metric accuracy (default 1e-6)")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("aggregate", help="metric-guided quotient and report")
    p.add_argument("file")
    p.add_argument("--discount", "-g", type=float, required=True)
    p.add_argument("--metric-discount", "-c", type=float, required=True)
    p.add_argument("--epsilon", "-e", type=float, required=True,
                   help="aggregation diameter target")
    p.add_argument("--metric-epsilon", type=float, default=1e-9,
                   help="certified metric accuracy (default 1e-9)")
    p.add_argument("--output", "-o", help="write the quotient model here")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("toy", help="grid-model convergence study")
    p.add_argument("n", type=int, nargs="+", help="grid sizes")
    p.add_argument("--discount", "-g", type=float, default=0.5)
    p.add_argument("--metric-discount", "-c", type=float, default=0.5)
    p.add_argument("--epsilon", "-e", type=float, default=1e-6,
                   help="certified metric accuracy (default 1e-6)")
    p.add_argument("--output", "-o",
                   help="write the model for the first grid size here")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("perturb", help="metric stability bound for two models")
    p.add_argument("file")
    p.add_argument("other")
    p.add_argument("--metric-discount", "-c", type=float, required=True)
    p.add_argument("--epsilon", "-e", type=float, default=1e-8,
                   help="certified metric accuracy (default 1e-8)")
    p.set_defaults(func=cmd_perturb)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MdpDocumentError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
