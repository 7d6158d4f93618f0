"""Command line: run experiments, check the oracle, compare runs, validate MDPs.

Exit codes: 0 success, 1 validation failure (bad config, bad MDP file,
failed oracle checks), 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import envs, harness, mdp as mdp_mod, verify
from .config import ConfigError, load_config
from .mdp import InvalidMdpError
from .oracle import InstanceTooLarge


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inoc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="execute a multi-seed experiment")
    runp.add_argument("--config", help="key=value config file")
    runp.add_argument("--env", help="two_state or four_rooms (shorthand for --set env=...)")
    runp.add_argument("--out", help="output directory (shorthand for --set out_dir=...)")
    runp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                      help="override a config key; repeatable")

    op = sub.add_parser("oracle-check", help="run the oracle property battery")
    op.add_argument("--seed", type=int, default=0)
    op.add_argument("--instances", type=int, default=20)
    op.add_argument("--tol-scale", type=float, default=1.0,
                    help="multiply every tolerance (0 forces failures)")
    op.add_argument("--mc-paths", type=int, default=20_000)
    op.add_argument("--states", type=int, default=3)
    op.add_argument("--options", type=int, default=2)
    op.add_argument("--out", help="also write the report to this file")

    cp = sub.add_parser("compare", help="summarize two aggregate files")
    cp.add_argument("file_a")
    cp.add_argument("file_b")
    cp.add_argument("--optimum", type=float, help="oracle optimum for plateau escape")
    cp.add_argument("--threshold", type=float, help="absolute return threshold")
    cp.add_argument("--window", type=int, default=50)
    cp.add_argument("--column", default="mean_return_undisc")

    vp = sub.add_parser("validate-env", help="validate a named env or MDP file")
    vp.add_argument("target", help="two_state, four_rooms, or a description-file path")
    return p


def cmd_run(args) -> int:
    overrides = list(args.set)
    if args.env:
        overrides.insert(0, f"env={args.env}")
    if args.out:
        overrides.append(f"out_dir={args.out}")
    cfg = load_config(args.config, overrides)
    result = harness.run(cfg)
    print(f"wrote {len(result['runs'])} run files and {result['aggregate']}")
    return 0


def cmd_oracle_check(args) -> int:
    if args.states * args.options > 500:
        raise InstanceTooLarge(f"{args.states * args.options} pairs exceeds the oracle cap")
    results = verify.run_battery(seed=args.seed, instances=args.instances,
                                 tol_scale=args.tol_scale, mc_paths=args.mc_paths)
    report = verify.format_report(results)
    print(report, end="")
    if args.out:
        Path(args.out).write_text(report)
    return 0 if all(r.passed for r in results) else 1


def cmd_compare(args) -> int:
    summary = harness.compare(args.file_a, args.file_b, optimum=args.optimum,
                              threshold=args.threshold, window=args.window,
                              column=args.column)
    print(summary.to_text(Path(args.file_a).stem, Path(args.file_b).stem), end="")
    return 0


def cmd_validate_env(args) -> int:
    if args.target == "two_state":
        envs.two_state_mdp()
    elif args.target == "four_rooms":
        envs.four_rooms()
    else:
        mdp_mod.from_file(args.target)
    print(f"{args.target}: valid")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "oracle-check": cmd_oracle_check,
        "compare": cmd_compare,
        "validate-env": cmd_validate_env,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, InvalidMdpError, InstanceTooLarge, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
