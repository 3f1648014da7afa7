"""Command line interface.

Subcommands: ``run`` (single config to trace CSV + summary JSON), ``sweep``
(k/T/q grid to one CSV per cell plus an index file), ``infer`` (sequential
test / optimal stopping / policy comparison on a simulated stream) and
``validate`` (built-in cross-check suites).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from swfalloc.config import ConfigError, load_config
from swfalloc.harness import run_infer, run_single, run_sweep, run_validate


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swf-alloc",
                                description="Online welfare-maximizing "
                                            "resource allocation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, out_default="out"):
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--out", default=out_default, help="output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the instance seed")

    run_p = sub.add_parser("run", help="run a single configuration")
    add_common(run_p)
    run_p.add_argument("--snapshot-every", type=int, default=None,
                       help="record the full policy every N steps")

    sweep_p = sub.add_parser("sweep", help="run a k/T/q sweep grid")
    add_common(sweep_p)
    sweep_p.add_argument("--jobs", type=int, default=None,
                         help="worker processes (env SWF_ALLOC_JOBS as fallback)")

    infer_p = sub.add_parser("infer", help="sequential inference on a stream")
    add_common(infer_p)
    infer_p.add_argument("--mode", required=True,
                         choices=("test", "stop", "compare"))
    infer_p.add_argument("--w0", type=float, default=0.0,
                         help="welfare threshold")
    infer_p.add_argument("--direction", choices=("exceeds", "below"),
                         default="exceeds")
    infer_p.add_argument("--optimal", action="store_true",
                         help="target the optimal policy and collect data "
                              "with the optimistic loop")
    infer_p.add_argument("--policy", default=None,
                         help="JSON file with a fixed policy vector")
    infer_p.add_argument("--policy2", default=None,
                         help="second policy for compare mode")
    infer_p.add_argument("--gamma", type=float, default=0.0,
                         help="coverage floor for logging marginals")
    infer_p.add_argument("--t-max", type=int, default=None,
                         help="cap on the stream length")

    val_p = sub.add_parser("validate", help="run the built-in cross checks")
    val_p.add_argument("--full", action="store_true",
                       help="larger validation suites")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return run_validate(quick=not args.full)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, instance_seed=args.seed)
        if args.command == "run":
            if args.snapshot_every is not None:
                cfg = dataclasses.replace(cfg,
                                          snapshot_every=args.snapshot_every)
            summary = run_single(cfg, args.out)
            print(f"mean final regret {summary['final_regret_mean']:.6g} "
                  f"-> {args.out}")
            return 0
        if args.command == "sweep":
            index = run_sweep(cfg, args.out, jobs=args.jobs)
            print(f"{len(index['cells'])} cells -> {args.out}")
            return 0
        decision = run_infer(cfg, args.mode, args.out, w0=args.w0,
                             direction=args.direction, optimal=args.optimal,
                             policy_path=args.policy,
                             policy2_path=args.policy2, gamma=args.gamma,
                             t_max=args.t_max,
                             stream_seed=cfg.run_seeds[0])
        print(f"{decision['verdict']} at t={decision['time']}")
        return 0
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
