"""Command-line front end: solve, evaluate, certify, sweep, simulate, discretize.

Exit codes: 0 success (and certification PASS), 1 I/O failure, 2 validation
failure, 3 certification FAIL, 4 enumeration cap exceeded. All output is
deterministic given the flags; floats are rendered with 17 significant
digits so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .discretizer import discretize, load_affine_spec
from .evaluator import (
    CapExceededError,
    DEFAULT_LEAF_CAP,
    _simulate_arrays,
    evaluate_policy,
    monte_carlo_risk,
)
from .model import (
    FiniteModel,
    MarkovPolicy,
    ModelValidationError,
    check_policy,
    ensure_valid,
    load_model,
    save_model,
    validate_model,
)
from .oracle import DEFAULT_HISTORY_CAP, DEFAULT_POLICY_CAP, certify
from .risk import RiskParam
from .solver import solve_exputil, solve_risk_neutral, theta_sweep

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_CERTIFY_FAIL = 3
EXIT_CAP = 4


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _load_checked_model(path: str, renormalize: bool) -> FiniteModel:
    model = load_model(path, renormalize=renormalize)
    report = validate_model(model)
    if not report.ok:
        raise ModelValidationError("invalid model:\n" + str(report))
    return model


def _parse_thetas(text: str) -> list[RiskParam]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ModelValidationError(f"could not parse theta list {text!r}: {exc}") from None
    if not values:
        raise ModelValidationError("theta list is empty")
    params = [RiskParam(v) for v in values]
    for a, b in zip(params, params[1:]):
        if not a.theta < b.theta:
            raise ModelValidationError(
                f"theta list must be strictly ascending, got {a.theta!r} before {b.theta!r}"
            )
    return params


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_policy_csv(path: str, model: FiniteModel) -> MarkovPolicy:
    mu = np.full((model.horizon, model.n_states), -1, dtype=np.int64)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:3]] != ["t", "state", "action"]:
                raise ModelValidationError(f"policy file {path}: expected header t,state,action")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) < 3:
                    raise ModelValidationError(f"policy file {path}: line {lineno} has {len(row)} fields")
                t = int(row[0])
                x = model.state_index(row[1])
                a = row[2]
                if a in model.actions:
                    u = model.actions.index(a)
                else:
                    u = int(a)
                if not 0 <= t < model.horizon:
                    raise ModelValidationError(f"policy file {path}: stage {t} out of range")
                mu[t, x] = u
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ModelValidationError):
            raise
        raise ModelValidationError(f"policy file {path}: {exc}") from None
    if np.any(mu < 0):
        t, x = next(zip(*np.nonzero(mu < 0)))
        raise ModelValidationError(f"policy file {path}: no action for stage {t}, state {model.states[x]!r}")
    policy = MarkovPolicy(mu)
    check_policy(model, policy)
    return policy


def cmd_solve(args) -> int:
    model = _load_checked_model(args.model, args.renormalize)
    x0 = model.state_index(args.x0)
    if args.risk_neutral:
        result = solve_risk_neutral(model)
    else:
        if args.theta is None:
            raise ModelValidationError("solve requires --theta or --risk-neutral")
        result = solve_exputil(model, RiskParam(args.theta))
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    v = result.values.v
    value_rows = [
        [str(t), model.states[x], _fmt(v[t, x])]
        for t in range(model.horizon + 1)
        for x in range(model.n_states)
    ]
    _write_csv(out_dir / "values.csv", ["t", "state", "value"], value_rows)
    policy_rows = [
        [str(t), model.states[x], model.actions[result.policy.action(t, x)]]
        for t in range(model.horizon)
        for x in range(model.n_states)
    ]
    _write_csv(out_dir / "policy.csv", ["t", "state", "action"], policy_rows)
    print(f"V0[{model.states[x0]}] = {_fmt(result.value_at(x0))}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = _load_checked_model(args.model, args.renormalize)
    if not args.policy:
        raise ModelValidationError("evaluate requires --policy")
    policy = _read_policy_csv(args.policy, model)
    if args.theta is None:
        raise ModelValidationError("evaluate requires --theta")
    rp = RiskParam(args.theta)
    x0 = model.state_index(args.x0)
    exact = evaluate_policy(model, policy, rp, x0)
    print(f"exact[{model.states[x0]}] = {_fmt(exact)}")
    if args.mc:
        if args.seed is None or args.trials is None:
            raise ModelValidationError("--mc requires --seed and --trials")
        estimate, stderr = monte_carlo_risk(model, policy, rp, x0, args.seed, args.trials)
        print(f"mc[{model.states[x0]}] = {_fmt(estimate)} +/- {_fmt(stderr)}")
    return EXIT_OK


def cmd_certify(args) -> int:
    model = _load_checked_model(args.model, args.renormalize)
    if args.theta is None:
        raise ModelValidationError("certify requires --theta")
    x0 = model.state_index(args.x0)
    cert = certify(
        model,
        RiskParam(args.theta),
        x0,
        markov_cap=args.cap_policies,
        history_cap=min(args.cap_policies, DEFAULT_HISTORY_CAP),
    )
    print(f"dp_value      = {_fmt(cert.dp_value)}")
    print(f"markov_value  = {_fmt(cert.markov_value)}")
    print(f"history_value = {_fmt(cert.history_value)}")
    print(f"max_gap       = {_fmt(cert.max_gap)}")
    print(f"dp_policy_in_argmin = {'yes' if cert.dp_policy_in_argmin else 'no'}")
    print("PASS" if cert.passed else "FAIL")
    return EXIT_OK if cert.passed else EXIT_CERTIFY_FAIL


def cmd_sweep(args) -> int:
    model = _load_checked_model(args.model, args.renormalize)
    if not args.thetas:
        raise ModelValidationError("sweep requires --thetas")
    params = _parse_thetas(args.thetas)
    x0 = model.state_index(args.x0)
    points = theta_sweep(model, params, x0)
    rows = []
    previous = None
    for pt in points:
        changed = 0 if previous is None or pt.policy == previous else 1
        rows.append([_fmt(pt.theta), _fmt(pt.value), str(changed)])
        previous = pt.policy
    out = Path(args.out or "sweep.csv")
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["theta", "value_at_x0", "policy_changed_from_previous"], rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _load_checked_model(args.model, args.renormalize)
    if not args.policy:
        raise ModelValidationError("simulate requires --policy")
    policy = _read_policy_csv(args.policy, model)
    if args.seed is None or args.trials is None:
        raise ModelValidationError("simulate requires --seed and --trials")
    if args.trials < 1:
        raise ModelValidationError(f"trials must be >= 1, got {args.trials}")
    x0 = model.state_index(args.x0)
    states, actions, costs = _simulate_arrays(model, policy, x0, args.seed, args.trials)
    rows = []
    for i in range(args.trials):
        path = []
        for t in range(model.horizon):
            path.append(model.states[states[i, t]])
            path.append(model.actions[actions[i, t]])
        path.append(model.states[states[i, model.horizon]])
        rows.append([str(i), _fmt(costs[i]), " ".join(path)])
    out = Path(args.out or "trajectories.csv")
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["trial", "cost", "path"], rows)
    print(f"mean_cost = {_fmt(costs.mean())}")
    return EXIT_OK


def cmd_discretize(args) -> int:
    if not args.spec:
        raise ModelValidationError("discretize requires --spec")
    spec, grid = load_affine_spec(args.spec)
    model = discretize(spec, grid)
    ensure_valid(model)
    out = Path(args.out or "model.json")
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"wrote model with {model.n_states} states, {model.n_actions} actions, "
          f"{model.n_disturbances} noise atoms to {out}")
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "certify": cmd_certify,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "discretize": cmd_discretize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskdp",
        description="Finite-horizon risk-averse MDP solver and verification toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "run backward induction and write values.csv / policy.csv"),
        ("evaluate", "evaluate a fixed policy exactly (and optionally by Monte Carlo)"),
        ("certify", "compare the solver against brute-force enumeration"),
        ("sweep", "solve across an ascending list of theta values"),
        ("simulate", "draw seeded trajectories under a fixed policy"),
        ("discretize", "convert a continuous affine1d spec into a model file"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", help="path to a model JSON file")
        p.add_argument("--policy", help="path to a policy CSV file (t,state,action)")
        p.add_argument("--spec", help="path to a continuous spec JSON file (discretize only)")
        p.add_argument("--theta", type=float, help="risk-aversion parameter, strictly negative")
        p.add_argument("--thetas", help="comma-separated ascending list of negative thetas")
        p.add_argument("--risk-neutral", action="store_true", help="minimize the plain expectation")
        p.add_argument("--x0", default="0", help="initial state label or index (default: index 0)")
        p.add_argument("--seed", type=int, help="RNG seed for simulation")
        p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
        p.add_argument("--mc", action="store_true", help="add a Monte Carlo estimate (evaluate only)")
        p.add_argument("--out", help="output file (or directory for solve)")
        p.add_argument("--renormalize", action="store_true",
                       help="repair kernel rows whose sum drifts from 1 by at most 1e-9")
        p.add_argument("--cap-policies", type=int, default=DEFAULT_POLICY_CAP,
                       help="maximum number of policies to enumerate")
        p.add_argument("--cap-leaves", type=int, default=DEFAULT_LEAF_CAP,
                       help="maximum number of trajectory-tree leaves to enumerate")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = _COMMANDS[args.command]
    try:
        if args.command != "discretize" and not args.model:
            raise ModelValidationError(f"{args.command} requires --model")
        return handler(args)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ModelValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())
