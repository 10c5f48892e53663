"""Command-line entry point.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ImpactGameError, NumericalError, ValidationError
from .report import FORMATS, coefficient_table, emit
from .scenarios import load_config, preset, preset_description, preset_names, run_scenario
from .solver import solve_equilibrium

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64
WORKERS_ENV = "IMPACT_GAME_WORKERS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser():
    run_opts = _Parser(add_help=False)
    run_opts.add_argument("--seed", type=_seed, help="override the scenario seed")
    run_opts.add_argument("--paths", type=_positive_int, help="number of simulated paths")
    run_opts.add_argument("--out", default="results", help="output directory (default: results)")
    run_opts.add_argument("--format", choices=FORMATS, default="csv", help="output format (default: csv)")
    run_opts.add_argument("--workers", type=_positive_int, help=f"thread count; {WORKERS_ENV} takes precedence")

    parser = _Parser(prog="impact-game", description="Two-trader execution game with transient impact.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="print policy and value coefficient tables")
    p.add_argument("target", help="preset name or scenario file")

    p = sub.add_parser("simulate", help="run a scenario file", parents=[run_opts])
    p.add_argument("config", help="scenario JSON file")

    p = sub.add_parser("scenario", help="run a built-in preset", parents=[run_opts])
    p.add_argument("preset", help="preset name (see 'list')")

    sub.add_parser("verify", help="run the oracle property suite")
    sub.add_parser("list", help="list built-in presets")
    return parser


def _load(target):
    if target in preset_names():
        return preset(target)
    if Path(target).exists():
        return load_config(target)
    raise ValidationError(f"{target!r} is neither a preset nor an existing file")


def _workers(args):
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"{WORKERS_ENV} must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValidationError(f"{WORKERS_ENV} must be a positive integer, got {env!r}")
        return n
    return args.workers


def _run(sc, args, out):
    sim = sc.simulation
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    if args.paths is not None:
        sim = replace(sim, num_paths=args.paths)
    sc = replace(sc, simulation=sim)
    results = run_scenario(sc, workers=_workers(args))
    written = emit(results, args.format, args.out, scenario=sc)
    for f in written.files:
        print(f, file=out)
    print(written.config, file=out)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        if args.command == "list":
            for name in preset_names():
                print(f"{name:10s} {preset_description(name)}", file=out)
        elif args.command == "solve":
            sc = _load(args.target)
            for point, flat in sc.grid():
                label = ", ".join(f"{k}={v:g}" for k, v in point.items())
                print(f"# {sc.name}" + (f" [{label}]" if label else ""), file=out)
                sol = solve_equilibrium(flat.market, flat.env, flat.traders)
                print(coefficient_table(sol), file=out)
        elif args.command == "simulate":
            _run(load_config(args.config), args, out)
        elif args.command == "scenario":
            if args.preset not in preset_names():
                parser.error(f"unknown preset {args.preset!r}; choose from {', '.join(preset_names())}")
            _run(preset(args.preset), args, out)
        elif args.command == "verify":
            from .verification import run_suite

            results = run_suite(report=lambda line: print(line, file=out))
            return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ImpactGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cli_main(argv=None) -> int:
    return main(argv)


def entry():
    sys.exit(main())
