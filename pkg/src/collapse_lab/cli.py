"""Command-line harness around the experiment registry.

Subcommands: ``run`` executes configs and writes reports, ``validate``
checks configs without running, ``list`` prints the registry.  Exit codes:
0 all acceptance checks passed, 1 a check failed, 2 usage or config error,
3 solver failure.  COLLAPSE_LAB_THREADS bounds how many configs run
concurrently; each config writes to its own directory, named after the
config file, so parallel runs never share files.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .experiments import REGISTRY, run_experiment, write_error, write_report
from .grids import PositivityError
from .timestep import StiffnessError

_SOLVER_ERRORS = (StiffnessError, PositivityError, RuntimeError, ValueError,
                  ArithmeticError, np.linalg.LinAlgError)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="collapse-lab",
        description="numerical laboratory for collapsing metric flows")
    sub = parser.add_subparsers(dest="command", metavar="command")

    run_p = sub.add_parser("run", help="run experiments from config files")
    run_p.add_argument("--config", action="append", required=True,
                       metavar="PATH", help="config file (repeatable)")
    run_p.add_argument("--out", metavar="DIR",
                       help="base output directory (default: out)")

    val_p = sub.add_parser("validate", help="validate configs without running")
    val_p.add_argument("--config", action="append", required=True,
                       metavar="PATH")

    list_p = sub.add_parser("list", help="list available experiments")
    list_p.add_argument("--json", action="store_true",
                        help="machine-readable listing")
    return parser


def _thread_count():
    raw = os.environ.get("COLLAPSE_LAB_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        count = 0
    if count < 1:
        raise ConfigError(
            f"COLLAPSE_LAB_THREADS must be a positive integer, got {raw!r}")
    return count


def _run_one(stem, cfg, out_dir):
    try:
        report = run_experiment(cfg)
    except _SOLVER_ERRORS as exc:
        write_error(out_dir, cfg.experiment, exc)
        return 3, f"{stem}: ERROR {type(exc).__name__}: {exc}"
    write_report(report, out_dir)
    if report.passed:
        return 0, f"{stem}: PASS ({len(report.checks)} checks) -> {out_dir}"
    failed = ", ".join(c.name for c in report.checks if not c.passed)
    return 1, f"{stem}: FAIL [{failed}] -> {out_dir}"


def _cmd_run(args):
    try:
        threads = _thread_count()
        jobs = []
        for raw in args.config:
            cfg = load_config(raw)
            stem = Path(raw).stem
            base = args.out or cfg.out or "out"
            jobs.append((stem, cfg, Path(base) / stem))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if len(jobs) > 1 and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: _run_one(*j), jobs))
    else:
        results = [_run_one(*j) for j in jobs]
    worst = 0
    for code, line in results:
        print(line, file=sys.stderr if code else sys.stdout)
        worst = max(worst, code)
    return worst


def _cmd_validate(args):
    code = 0
    for raw in args.config:
        try:
            cfg = load_config(raw)
        except ConfigError as exc:
            print(f"{raw}: error: {exc}", file=sys.stderr)
            code = 2
        else:
            print(f"{raw}: ok ({cfg.experiment})")
    return code


def _cmd_list(args):
    if args.json:
        payload = [{"name": d.name, "description": d.description}
                   for d in REGISTRY.values()]
        print(json.dumps(payload, indent=2))
    else:
        for d in REGISTRY.values():
            print(f"{d.name:22s} {d.description}")
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    handler = {"run": _cmd_run, "validate": _cmd_validate,
               "list": _cmd_list}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
