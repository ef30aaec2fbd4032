"""Command-line entry point ``aoimfc``.

Errors are reported as a single ``error: <kind>: <message>`` line on
stderr with exit status 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .core import ConfigError, SimConfig, build_config, load_config
from .policy import ConstantRate, PolicyFormatError, load_policy, policy_to_dict, save_policy
from .simulation import run_episode
from .trainer import TrainConfig, train_policy

MODELS = ("pomfc", "na", "na-dec", "na-dec-particles")
VARIANTS = ("true-state", "avg-belief")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON configuration file")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "doc"), default="csv")


def _policy_args(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--policy", metavar="PATH", required=required, help="policy file (default: ConstantRate 0.5)")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--variant", choices=VARIANTS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoimfc", description="Decentralized AoI simulator and policy lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one episode and emit its metrics")
    _common(p)
    _policy_args(p)

    p = sub.add_parser("evaluate", help="Monte Carlo evaluation of a policy")
    _common(p)
    _policy_args(p)
    p.add_argument("--runs", type=int, help="number of Monte Carlo runs S")
    p.add_argument("--workers", type=int, default=1)

    for name, what in (("sweep-rate", "ConstantRate rates"), ("sweep-threshold", "Threshold values")):
        p = sub.add_parser(name, help=f"sweep {what}")
        _common(p)
        p.add_argument("--runs", type=int)
        p.add_argument("--grid", type=float, nargs="+")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sweep-agents", help="evaluate a policy over a range of N")
    _common(p)
    _policy_args(p)
    p.add_argument("--runs", type=int)
    p.add_argument("--grid", type=int, nargs="+")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("train", help="train an upper-level policy with the cross-entropy method")
    _common(p)
    p.add_argument("--model", choices=MODELS, default="pomfc")
    p.add_argument("--variant", choices=VARIANTS, default="true-state")
    p.add_argument("--kind", choices=("static", "linear"), default="static")
    p.add_argument("--population", type=int, default=32)
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--episodes", type=int, default=4)
    p.add_argument("--elite-frac", type=float, default=0.2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--log", metavar="PATH", help="write the training log CSV here")

    p = sub.add_parser("filter-trace", help="per-epoch belief trace of one agent")
    _common(p)
    _policy_args(p)
    p.add_argument("--agent", type=int, default=0)
    p.add_argument("--snapshots", metavar="PATH", help="also write population snapshots here")
    p.add_argument("--times", type=int, nargs="+", default=list(experiments.SNAPSHOT_TIMES))
    return parser


def _config(args) -> SimConfig:
    if args.config:
        return load_config(args.config, seed=args.seed)
    return build_config({} if args.seed is None else {"seed": args.seed})


def _policy(args):
    return load_policy(args.policy) if args.policy else ConstantRate(0.5)


def _emit(args, result, cfg, policy=None) -> None:
    if args.out:
        experiments.export(result, args.out, args.format, cfg=cfg, policy=policy)
    else:
        sys.stdout.write(experiments.render(result, args.format, cfg=cfg, policy=policy))


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    cmd = args.command
    if cmd == "simulate":
        policy = _policy(args)
        m = run_episode(cfg, policy, args.model, args.variant, cfg.seed)
        _emit(args, experiments.aggregate([m], [cfg.seed], cfg), cfg, policy)
    elif cmd == "evaluate":
        policy = _policy(args)
        res = experiments.monte_carlo(cfg, policy, args.model, args.variant, cfg.seed, args.runs,
                                      workers=args.workers)
        _emit(args, res, cfg, policy)
    elif cmd in ("sweep-rate", "sweep-threshold"):
        kind = cmd.split("-")[1]
        res = experiments.sweep(kind, args.grid, cfg, args.runs, base_seed=cfg.seed, workers=args.workers)
        _emit(args, res, cfg)
    elif cmd == "sweep-agents":
        policy = _policy(args)
        res = experiments.sweep("agents", args.grid, cfg, args.runs, policy=policy, model=args.model,
                                variant=args.variant, base_seed=cfg.seed, workers=args.workers)
        _emit(args, res, cfg, policy)
    elif cmd == "train":
        tc = TrainConfig(population=args.population, elite_frac=args.elite_frac, iterations=args.iterations,
                         episodes=args.episodes, seed=cfg.seed, workers=args.workers)
        policy, log = train_policy(cfg, tc, args.model, args.variant, args.kind)
        if args.log:
            log.to_csv(args.log)
        if args.out:
            save_policy(policy, args.out)
        else:
            json.dump(policy_to_dict(policy), sys.stdout, indent=2)
            sys.stdout.write("\n")
    elif cmd == "filter-trace":
        policy = _policy(args)
        tr = experiments.filter_trace(cfg, policy, args.agent, cfg.seed, model=args.model,
                                      variant=args.variant, snapshot_times=args.times)
        if args.out:
            experiments.write_trace(tr, args.out)
        else:
            print("t,true_aoi,belief_mean,belief_std,acks,ackfree")
            for row in zip(tr.t, tr.true_aoi, tr.mean, tr.std, tr.acks, tr.ackfree):
                print(",".join("%.17g" % v for v in row))
        if args.snapshots:
            experiments.write_snapshots(tr, args.snapshots)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        kind, msg = "config", str(exc)
    except PolicyFormatError as exc:
        kind, msg = "policy", str(exc)
    except (OSError, IndexError, ValueError) as exc:
        kind, msg = type(exc).__name__, str(exc)
    print(f"error: {kind}: {' '.join(msg.split())}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
