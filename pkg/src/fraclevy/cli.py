"""Command-line entry point: ``fraclevy run | verify | emit-plotdata``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, load_config


def _cmd_run(args) -> int:
    from .experiments import run_experiment

    cfg = load_config(args.config, seed=args.seed)
    run_dir = run_experiment(cfg, args.out)
    print(f"run directory: {run_dir}")
    return 0


def _cmd_verify(args) -> int:
    from .io import write_json
    from .verification import run_suite

    tolerances = None
    if args.config:
        tolerances = load_config(args.config)["solver"]["tolerances"]
    report = run_suite(args.suite, tolerances=tolerances, seed=args.seed, log=lambda s: print(s, flush=True))
    n_fail = sum(not c.passed for c in report.checks)
    print(f"{len(report.checks) - n_fail}/{len(report.checks)} checks passed in {report.seconds:.1f} s")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify_report.json").write_text(report.to_json() + "\n")
    return 0 if report.passed else 1


def _cmd_emit(args) -> int:
    from .experiments import emit_plotdata

    for name in emit_plotdata(args.run_dir):
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraclevy", description="Fractional Levy noise calculus: simulate, solve, verify.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a config file")
    r.add_argument("--config", required=True, help="JSON config with blocks model/grid/experiment/solver/output")
    r.add_argument("--seed", type=int, default=None, help="override experiment.seed")
    r.add_argument("--out", default=None, help="run directory (default: $FRACLEVY_OUTPUT_ROOT/<kind>-<hash>)")
    r.set_defaults(func=_cmd_run)
    v = sub.add_parser("verify", help="run a property suite and report pass/fail per check")
    v.add_argument("--suite", default="all", help="isometry, operators, wick, skorohod, volterra, sde, hoelder or all")
    v.add_argument("--config", default=None, help="config whose solver.tolerances override the defaults")
    v.add_argument("--seed", type=int, default=None, help="seed for the randomized suites")
    v.add_argument("--out", default=None, help="directory for verify_report.json")
    v.set_defaults(func=_cmd_verify)
    e = sub.add_parser("emit-plotdata", help="write plot-ready CSVs for a run directory")
    e.add_argument("run_dir", help="directory produced by 'run'")
    e.set_defaults(func=_cmd_emit)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .volterra import DivergenceError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, ArithmeticError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
