"""Command-line entry points: run, sweep, waypoints, validate, compare-fl."""

from __future__ import annotations

import argparse
import os
import sys
from copy import deepcopy

from .config import ConfigError, default_config, dump_config, load_config
from .experiment import compare_fl, run_experiment, run_waypoints, sweep, write_waypoints_csv
from .validation import run_all


def _load(args):
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "policy", None):
        cfg = deepcopy(cfg)
        cfg.policy.name = args.policy
        cfg.validate()
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    out = args.out or os.path.join(cfg.out_dir, f"{cfg.policy.name}_seed{seed}")
    result = run_experiment(cfg, seed, out_dir=out, dump_links=args.dump_links)
    final = result.metrics[-1]
    print(f"policy={final.policy} seed={seed} rounds={final.round} "
          f"accuracy={final.test_accuracy_mean_estimate:.4f} "
          f"consensus_error={final.consensus_error:.3e}")
    print(f"outputs in {out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(cfg.seeds)
    out = args.out or os.path.join(cfg.out_dir, f"sweep_{cfg.policy.name}")
    agg = sweep(cfg, seeds, out_dir=out)
    print(f"policy={agg['policy']} seeds={seeds}")
    print(f"final accuracy {agg['accuracy_mean'][-1]:.4f} +- {agg['accuracy_std'][-1]:.4f}, "
          f"final consensus {agg['consensus_mean'][-1]:.3e} +- {agg['consensus_std'][-1]:.3e}")
    print(f"outputs in {out}")
    return 0


def _cmd_waypoints(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    result = run_waypoints(cfg, seed)
    out = args.out or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"waypoints_{cfg.policy.name}_seed{seed}.csv")
    write_waypoints_csv(path, [result])
    print(f"{len(result.waypoints)} waypoints -> {path}")
    return 0


def _cmd_validate(args) -> int:
    checks = run_all(fast=args.fast)
    width = max(len(c.name) for c in checks)
    failures = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {c.name:<{width}}  {c.detail}")
        failures += 0 if c.passed else 1
    print(f"{len(checks) - failures}/{len(checks)} property suites passed")
    return 0 if failures == 0 else 1


def _cmd_compare_fl(args) -> int:
    cfg = _load(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(cfg.seeds)
    report = compare_fl(cfg, seeds)
    for row in report["per_seed"]:
        print(f"seed={row['seed']} federated_final={row['federated_final_accuracy']:.4f} "
              f"proposed_final={row['proposed_final_accuracy']:.4f} "
              f"rounds_to_target={row['proposed_rounds_to_target']}"
              f"{'' if row['reached'] else ' (never reached)'}")
    print(f"mean rounds to reach the federated final accuracy: "
          f"{report['mean_rounds_to_target']:.1f} of {report['total_rounds']}")
    return 0


def _cmd_dump_config(args) -> int:
    print(dump_config(_load(args)), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshrelay",
        description="UAV-relay-aided decentralized learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=False):
        p.add_argument("--config", help="sectioned key = value config file "
                                        "(bundled defaults when omitted)")
        p.add_argument("--policy", help="override [policy] name")
        if seeds:
            p.add_argument("--seeds", help="comma-separated seed list")
        else:
            p.add_argument("--seed", type=int, help="master seed (default: first configured)")
        p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="single experiment run")
    common(p_run)
    p_run.add_argument("--dump-links", action="store_true",
                       help="also write the per-round adjacency edge list")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="multi-seed sweep with aggregation")
    common(p_sweep, seeds=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_way = sub.add_parser("waypoints", help="trajectory only, no learning")
    common(p_way)
    p_way.set_defaults(func=_cmd_waypoints)

    p_val = sub.add_parser("validate", help="run the property check suites")
    p_val.add_argument("--fast", action="store_true", help="reduced Monte-Carlo sizes")
    p_val.set_defaults(func=_cmd_validate)

    p_cmp = sub.add_parser("compare-fl", help="proposed vs UAV-as-parameter-server")
    common(p_cmp, seeds=True)
    p_cmp.set_defaults(func=_cmd_compare_fl)

    p_dump = sub.add_parser("dump-config", help="print the effective configuration")
    common(p_dump)
    p_dump.set_defaults(func=_cmd_dump_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
