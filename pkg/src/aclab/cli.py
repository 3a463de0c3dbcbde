"""Command-line entry point ``aclab``.

Exit codes: 0 success, 1 usage or configuration error, 2 validation error,
3 failed acceptance verdict.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .mdp import ErgodicityError, ValidationError, check_ergodicity, fixture, joint_kernel, load_mdp, random_mdp, save_mdp
from .ode import OdeBlowUp, integrate
from .online import AcConfig, run
from .policy import schedule_by_name
from .verify import verify

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_VERDICT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _spec_from(source: str):
    if Path(source).suffix == ".json" or Path(source).exists():
        return load_mdp(source)
    return fixture(source)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _out(args, name: str) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def cmd_validate(args) -> int:
    spec = load_mdp(args.mdp)
    rep = check_ergodicity(joint_kernel(spec, np.full((spec.n_states, spec.n_actions), 1 / spec.n_actions)))
    print(f"valid: {spec.n_states} states, {spec.n_actions} actions, gamma={spec.gamma}")
    print(f"uniform-policy chain: irreducible={rep.irreducible} period={rep.period}")
    return EXIT_OK


def cmd_gen_mdp(args) -> int:
    if args.n_states < 1 or args.n_actions < 1:
        raise UsageError("n_states and n_actions must be >= 1")
    if not 0 <= args.gamma < 1:
        raise UsageError("gamma must lie in [0, 1)")
    spec = random_mdp(args.n_states, args.n_actions, args.gamma, args.seed, args.min_prob)
    path = Path(args.output) if args.output else _out(args, f"mdp_{args.n_states}x{args.n_actions}_seed{args.seed}.json")
    save_mdp(spec, path)
    rep = check_ergodicity(joint_kernel(spec, np.full((spec.n_states, spec.n_actions), 1 / spec.n_actions)))
    print(path)
    print(json.dumps({"irreducible": rep.irreducible, "aperiodic": rep.aperiodic, "period": rep.period,
                      "n_communicating_classes": rep.n_communicating_classes}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _spec_from(args.mdp)
    ck = _floats(args.checkpoints) if args.checkpoints else list(np.linspace(0, args.T, 11))
    cfg = AcConfig(N=args.N, T=args.T, alpha=args.alpha, seed=args.seed, checkpoint_times=ck,
                   run_id=args.run_id, schedule=schedule_by_name(args.schedule))
    tr = run(spec, cfg)
    print(tr.write_csv(_out(args, f"trajectory_N{args.N}_seed{args.seed}.csv")))
    return EXIT_OK


def cmd_ode(args) -> int:
    spec = _spec_from(args.mdp)
    shape = (spec.n_states, spec.n_actions)
    ck = _floats(args.checkpoints) if args.checkpoints else list(np.linspace(0, args.T, 11))
    tr = integrate(spec, np.zeros(shape), np.zeros(shape), args.T, args.alpha, args.h, ck,
                   schedule_by_name(args.schedule), args.sigma_mass)
    print(tr.write_csv(_out(args, "ode.csv")))
    print(f"J_gap(T)={tr.J_gap[-1]:.6g} Y(T)={tr.Y[-1]:.6g}")
    return EXIT_OK


def cmd_exp(args) -> int:
    overrides = {"experiment": args.experiment, "workers": args.workers,
                 "schedule": args.schedule if args.schedule != "paper" else None}
    if args.seeds is not None:
        overrides["seeds"] = list(range(args.seed, args.seed + args.seeds))
    if args.config:
        config = ExperimentConfig.from_file(args.config, **overrides)
    else:
        config = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    out = Path(args.out_dir) / args.experiment
    report = run_experiment(config, out)
    print(json.dumps(report.summary(), indent=1, default=float))
    print(f"artifacts in {out}")
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_verify(args) -> int:
    extra = [load_mdp(args.mdp)] if args.mdp else None
    results = verify(args.filter, extra)
    if not results:
        raise UsageError(f"no check matches filter {args.filter!r}")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default="aclab_out")
    common.add_argument("--workers", type=int)
    common.add_argument("--schedule", default="paper", help="'paper' or 'constant:ZETA,ETA'")

    parser = _Parser(prog="aclab", description="Online actor-critic on finite MDPs and its limit ODE.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="check an MDP file")
    p.add_argument("mdp")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen-mdp", parents=[common], help="write a random MDP file")
    p.add_argument("--n-states", type=int, required=True)
    p.add_argument("--n-actions", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--min-prob", type=float, default=0.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_mdp)

    p = sub.add_parser("simulate", parents=[common], help="run online actor-critic")
    p.add_argument("--mdp", default="chainmdp", help="fixture name or MDP json")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--T", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--run-id", type=int, default=0)
    p.add_argument("--checkpoints", help="comma-separated times in [0, T]")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ode", parents=[common], help="integrate the limit ODE")
    p.add_argument("--mdp", default="chainmdp")
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-2)
    p.add_argument("--checkpoints")
    p.add_argument("--sigma-mass", choices=["normalized", "unnormalized"], default="normalized")
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("exp", parents=[common], help="run an acceptance experiment")
    p.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p.add_argument("--config")
    p.add_argument("--seeds", type=int, help="use seeds SEED..SEED+SEEDS-1")
    p.set_defaults(func=cmd_exp)

    p = sub.add_parser("verify", parents=[common], help="run the property-check suite")
    p.add_argument("--filter")
    p.add_argument("--mdp", help="also check this MDP file")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ErgodicityError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OdeBlowUp as exc:
        print(f"integration aborted: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except (UsageError, ValueError, TypeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
