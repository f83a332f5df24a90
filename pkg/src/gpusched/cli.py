"""Command-line interface.

Verdicts (schedulable or not, deadline misses) are reported inside the
output files; the exit code only distinguishes success (0) from invalid
input (2).
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .analysis import analyze
from .model import (
    AnalysisMethod,
    SmAllocation,
    TasksetFormatError,
    load_taskset,
    save_report,
    save_taskset,
)
from .simulator import LengthPolicy, SimConfig, simulate
from .workbench import (
    ThroughputScope,
    acceptance_sweep,
    gen_params_from_dict,
    generate_taskset,
    sweep_config_from_dict,
    sweep_to_csv,
    throughput_improvement,
)


class CliError(Exception):
    """Invalid input; message names the offending file or field."""


def _load_json(path, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"{what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} {path}: invalid JSON at line {exc.lineno}: "
                       f"{exc.msg}") from None


def _load_taskset(path):
    try:
        return load_taskset(path)
    except OSError as exc:
        raise CliError(f"taskset {path}: {exc.strerror}") from None
    except TasksetFormatError as exc:
        raise CliError(f"taskset {path}: {exc}") from None


def cmd_generate(args) -> int:
    data = _load_json(args.params, "params file")
    try:
        params = gen_params_from_dict(data)
        ts = generate_taskset(params, args.seed)
    except (TasksetFormatError, ValueError) as exc:
        raise CliError(f"params file {args.params}: {exc}") from None
    save_taskset(ts, args.out)
    return 0


def cmd_analyze(args) -> int:
    ts = _load_taskset(args.taskset)
    report = analyze(ts, AnalysisMethod(args.method))
    save_report(report, args.out)
    verdict = "schedulable" if report.schedulable else "not schedulable"
    print(f"{args.method}: {verdict}")
    return 0


def _load_allocation(path) -> SmAllocation:
    data = _load_json(path, "allocation file")
    if not isinstance(data, dict):
        raise CliError(f"allocation file {path}: expected an object mapping "
                       "task id to virtual-SM count")
    alloc = data.get("allocation", data)
    if not isinstance(alloc, dict) or not all(
            isinstance(v, int) for v in alloc.values()):
        raise CliError(f"allocation file {path}: counts must be integers")
    return SmAllocation({str(k): v for k, v in alloc.items()})


def cmd_simulate(args) -> int:
    ts = _load_taskset(args.taskset)
    alloc = _load_allocation(args.allocation)
    policy = (LengthPolicy.WORST_CASE if args.policy == "worst"
              else LengthPolicy.UNIFORM_RANDOM)
    horizon = None
    if args.horizon_us is not None:
        horizon = Fraction(args.horizon_us)
    try:
        trace = simulate(ts, alloc,
                         SimConfig(horizon=horizon, seed=args.seed,
                                   length_policy=policy))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    with open(args.out, "w") as fh:
        fh.write(trace.to_jsonl())
    misses = sum(1 for e in trace.events if e.action == "deadline-miss")
    print(f"{len(trace.events)} events, {misses} deadline misses, "
          f"{len(trace.truncated)} jobs truncated at horizon")
    return 0


def cmd_sweep(args) -> int:
    data = _load_json(args.config, "sweep config")
    if args.seed is not None:
        data = dict(data, seed=args.seed)
    try:
        cfg = sweep_config_from_dict(data)
    except TasksetFormatError as exc:
        raise CliError(f"sweep config {args.config}: {exc}") from None
    rows = acceptance_sweep(cfg)
    with open(args.out, "w") as fh:
        fh.write(sweep_to_csv(rows))
    print(f"{len(rows)} rows written to {args.out}")
    return 0


def cmd_throughput(args) -> int:
    ts = _load_taskset(args.taskset)
    alloc = _load_allocation(args.allocation)
    scope = (ThroughputScope.WHOLE_GPU if args.scope == "whole"
             else ThroughputScope.USED_SMS)
    try:
        eta = throughput_improvement(ts, alloc, scope)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(f"{float(eta):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpusched",
        description="Schedulability analysis, taskset generation, and "
                    "simulation for CPU-memory-GPU task systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a random taskset")
    p.add_argument("--params", required=True, help="generator params JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output taskset JSON")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze", help="run a schedulability analysis")
    p.add_argument("--taskset", required=True)
    p.add_argument("--method", required=True,
                   choices=[m.value for m in AnalysisMethod])
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="simulate under a fixed allocation")
    p.add_argument("--taskset", required=True)
    p.add_argument("--allocation", required=True,
                   help="JSON mapping task id to virtual-SM count")
    p.add_argument("--policy", choices=["worst", "uniform"], default="worst")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon-us", type=int, default=None)
    p.add_argument("--out", required=True, help="output trace JSONL")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run an acceptance-ratio sweep")
    p.add_argument("--config", required=True, help="sweep config JSON")
    p.add_argument("--seed", type=int, default=None,
                   help="override the master seed from the config")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("throughput", help="interleaving throughput gain")
    p.add_argument("--taskset", required=True)
    p.add_argument("--allocation", required=True)
    p.add_argument("--scope", choices=["whole", "used"], default="whole")
    p.set_defaults(func=cmd_throughput)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
