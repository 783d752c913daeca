"""Command-line front end.

Every subcommand accepts ``--config FILE``, a flat ``key=value`` file whose
keys are the long flag names (``eps-opt`` or ``eps_opt``). Flags given on the
command line win over the file.

Exit codes: 0 success, 1 validation error (bad input, bad file, bad config),
2 assertion failure (a checked inequality or structural property fails).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_dataset, rollout, save_dataset
from .estimators import estimate_model, fictitious_value, opema_value
from .experiment import build_sim_mdp, coerce_config, loglog_slope, parse_config_file, rows_to_csv, run_experiment, write_csv
from .hard import BanditMDPSpec, build_bandit_mdp, build_gated_mdp, verify_hard_instance
from .mdp import Policy, evaluate, load_mdp, load_policy, save_mdp, save_policy, validate, validate_policy
from .planning import approx_planner, local_membership
from .uniform import erm_check, simulation_lemma_bound, sup_error

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ASSERTION = 2


class ValidationError(Exception):
    pass


class AssertionFailure(Exception):
    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors, not assertion failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_truth(path):
    mdp, meta = load_mdp(path)
    problems = validate(mdp)
    if problems:
        raise ValidationError(f"{path}: {problems[0]}")
    return mdp, meta


def _behaviour(args, mdp, meta) -> Policy:
    if getattr(args, "mu", None):
        mu = load_policy(args.mu)
    elif "mu" in meta:
        mu = Policy(np.asarray(meta["mu"]))
    else:
        mu = Policy.uniform(mdp.H, mdp.S, mdp.A)
    problems = validate_policy(mu)
    if problems:
        raise ValidationError(f"behaviour policy: {problems[0]}")
    return mu


def _target(args, H, S, A) -> Policy:
    if args.policy:
        return load_policy(args.policy)
    return Policy.uniform(H, S, A)


def cmd_simulate(args) -> int:
    if args.mdp:
        mdp, meta = _load_truth(args.mdp)
        mu = _behaviour(args, mdp, meta)
    elif args.sim_horizon:
        mdp, mu = build_sim_mdp(args.sim_horizon, args.seed)
        if args.mdp_out:
            save_mdp(mdp, args.mdp_out, {"family": "simulation", "seed": args.seed})
    else:
        raise ValidationError("simulate needs --mdp or --sim-horizon")
    if args.n is None or args.n < 1:
        raise ValidationError("simulate needs --n >= 1")
    if not args.out:
        raise ValidationError("simulate needs --out")
    ds = rollout(mdp, mu, args.n, args.seed)
    save_dataset(ds, args.out)
    return EXIT_OK


def _model(args):
    if args.dataset:
        return estimate_model(load_dataset(args.dataset))
    if args.mdp:
        return _load_truth(args.mdp)[0]
    raise ValidationError("need --dataset or --mdp")


def cmd_plan(args) -> int:
    model = _model(args)
    plan = approx_planner(model, args.eps_opt or 0.0, seed=args.seed)
    member, _ = local_membership(model, plan.policy, args.eps_opt or 0.0)
    if not member:
        raise AssertionFailure("planner output lies outside the requested neighbourhood")
    if args.policy_out:
        save_policy(plan.policy, args.policy_out)
    _emit(plan.to_dict(), args.out)
    return EXIT_OK


def cmd_ope(args) -> int:
    if not args.dataset:
        raise ValidationError("ope needs --dataset")
    ds = load_dataset(args.dataset)
    model = estimate_model(ds)
    pi = _target(args, ds.H, ds.S, ds.A)
    doc = {"estimate": opema_value(model, pi).v}
    if args.mdp:
        truth, meta = _load_truth(args.mdp)
        doc["true_value"] = evaluate(truth, pi).v
        doc["error"] = doc["estimate"] - doc["true_value"]
        if args.fictitious:
            doc["fictitious_estimate"] = fictitious_value(model, truth, _behaviour(args, truth, meta), pi).v
    elif args.fictitious:
        raise ValidationError("the fictitious estimator needs --mdp")
    _emit(doc, args.out)
    return EXIT_OK


def cmd_sup(args) -> int:
    if not (args.mdp and args.dataset):
        raise ValidationError("sup needs --mdp and --dataset")
    truth, _ = _load_truth(args.mdp)
    model = estimate_model(load_dataset(args.dataset))
    pi = load_policy(args.policy) if args.policy else None
    rep = sup_error(truth, model, args.policy_class, eps_opt=args.eps_opt, pi=pi)
    doc = rep.to_dict()
    doc["simulation_lemma_bound"] = simulation_lemma_bound(truth, model)
    if args.check_erm:
        erm = erm_check(truth, model)
        doc["erm"] = {"learning_gap": erm.learning_gap, "bound": erm.bound, "holds": erm.holds}
        if not erm.holds:
            raise AssertionFailure("ERM inequality violated", doc)
    if rep.sup_value_gap > doc["simulation_lemma_bound"] + 1e-10:
        raise AssertionFailure("simulation-lemma bound does not dominate", doc)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_hard_gen(args) -> int:
    spec = BanditMDPSpec(args.H_half, args.S, args.A, args.tau, args.d_m)
    problems = spec.problems()
    if problems:
        raise ValidationError("; ".join(problems))
    if spec.gated:
        mdp, _, meta = build_gated_mdp(spec, args.seed)
    else:
        mdp, meta = build_bandit_mdp(spec, args.seed)
    if not args.out:
        raise ValidationError("hard-gen needs --out")
    save_mdp(mdp, args.out, meta)
    return EXIT_OK


def cmd_hard_verify(args) -> int:
    if not args.mdp:
        raise ValidationError("hard-verify needs --mdp")
    mdp, meta = load_mdp(args.mdp)
    for key in ("H_half", "S", "offset", "best_arms", "tau", "family"):
        if key not in meta:
            raise ValidationError(f"{args.mdp}: metadata block lacks {key!r}")
    mu = _behaviour(args, mdp, meta) if (args.mu or "mu" in meta) else None
    rep = verify_hard_instance(mdp, mu, meta, floor_fraction=args.floor_fraction)
    doc = rep.to_dict()
    if not rep.ok:
        raise AssertionFailure("hard-instance verification failed", doc)
    _emit(doc, args.out)
    return EXIT_OK


_EXPERIMENT_KEYS = ("kind", "horizons", "n", "K", "seed", "target", "n_grid", "workers", "S", "A", "tau", "d_m")


def cmd_experiment(args) -> int:
    values = {k: getattr(args, k) for k in _EXPERIMENT_KEYS if getattr(args, k, None) is not None}
    try:
        cfg = coerce_config(values)
        cfg.check()
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc))
    rows = run_experiment(cfg)
    if args.out:
        write_csv(rows, args.out)
    else:
        sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK


def cmd_slope(args) -> int:
    if not args.csv:
        raise ValidationError("slope needs a CSV path")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = loglog_slope(args.csv, args.column, x=args.x)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    doc = {"column": args.column, "x": args.x, **fit.__dict__}
    if args.expect is not None:
        lo, hi = args.expect
        if not lo <= fit.slope <= hi:
            raise AssertionFailure(f"slope {fit.slope:.4f} outside [{lo}, {hi}]", doc)
    _emit(doc, args.out)
    return EXIT_OK


def _common(p):
    p.add_argument("--config", help="flat key=value file; command-line flags override it")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tabular-ope", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="roll out episodes under a behaviour policy")
    _common(p)
    p.add_argument("--mdp")
    p.add_argument("--mu", help="behaviour policy JSON (uniform, or the instance's own, when omitted)")
    p.add_argument("--sim-horizon", type=int, help="use the two-state simulation MDP with this horizon")
    p.add_argument("--mdp-out", help="also save the simulation MDP")
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plan", help="plan on a true or empirical model")
    _common(p)
    p.add_argument("--mdp")
    p.add_argument("--dataset")
    p.add_argument("--eps-opt", type=float, default=0.0)
    p.add_argument("--policy-out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("ope", help="plug-in value estimate of a target policy")
    _common(p)
    p.add_argument("--dataset")
    p.add_argument("--mdp", help="true MDP, to report the error")
    p.add_argument("--policy", help="target policy JSON (uniform when omitted)")
    p.add_argument("--mu")
    p.add_argument("--fictitious", action="store_true")
    p.set_defaults(func=cmd_ope)

    p = sub.add_parser("sup", help="exact supremum of the estimation error over a policy class")
    _common(p)
    p.add_argument("--mdp")
    p.add_argument("--dataset")
    p.add_argument("--class", dest="policy_class", choices=("global", "local", "fixed"), default="global")
    p.add_argument("--eps-opt", type=float)
    p.add_argument("--policy")
    p.add_argument("--check-erm", action="store_true")
    p.set_defaults(func=cmd_sup)

    p = sub.add_parser("hard-gen", help="build a bandit-embedded hard instance")
    _common(p)
    p.add_argument("--H-half", dest="H_half", type=int, default=4)
    p.add_argument("--S", type=int, default=4)
    p.add_argument("--A", type=int, default=2)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--d-m", dest="d_m", type=float, help="gate the instance with this coverage level")
    p.set_defaults(func=cmd_hard_gen)

    p = sub.add_parser("hard-verify", help="check a built hard instance")
    _common(p)
    p.add_argument("--mdp")
    p.add_argument("--mu")
    p.add_argument("--floor-fraction", type=float, default=0.25)
    p.set_defaults(func=cmd_hard_verify)

    p = sub.add_parser("experiment", help="seeded RMSE study, written as CSV")
    _common(p)
    p.set_defaults(seed=None)
    p.add_argument("--kind")
    p.add_argument("--horizons", type=_ints)
    p.add_argument("--n", type=int)
    p.add_argument("--k", dest="K", type=int)
    p.add_argument("--n-grid", dest="n_grid", type=_ints)
    p.add_argument("--target", help="mu, optimal, or a policy JSON path")
    p.add_argument("--workers", type=int)
    p.add_argument("--S", type=int)
    p.add_argument("--A", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--d-m", dest="d_m", type=float)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("slope", help="log-log slope of a CSV column")
    _common(p)
    p.add_argument("csv", nargs="?")
    p.add_argument("--column", default="rmse_sub")
    p.add_argument("--x", default="H")
    p.add_argument("--expect", type=float, nargs=2, metavar=("LO", "HI"))
    p.set_defaults(func=cmd_slope)
    parser.subcommands = sub.choices
    return parser


def _apply_config(parser, argv):
    """Re-parse with config-file values installed as subcommand defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = parse_config_file(args.config)
    sub = parser.subcommands[args.command]
    dests = {a.dest: a for a in sub._actions}
    aliases = {opt.lstrip("-").replace("-", "_"): a.dest for a in sub._actions for opt in a.option_strings}
    defaults = {}
    for key, raw in values.items():
        dest = aliases.get(key, key)
        if dest not in dests or dest in ("config", "help", "func"):
            raise ValidationError(f"{args.config}: unknown key {key!r} for {args.command}")
        action = dests[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = raw.lower() in ("1", "true", "yes")
        elif action.type is not None:
            try:
                defaults[dest] = action.type(raw) if action.nargs is None else [action.type(x) for x in raw.split()]
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ValidationError(f"{args.config}: bad value for {key!r}: {exc}")
        else:
            defaults[dest] = raw
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except AssertionFailure as exc:
        if exc.payload is not None:
            _emit(exc.payload, getattr(args, "out", None))
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    except (ValidationError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
