"""Command line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PLANNER_KINDS, ConfigError, ExperimentConfig, config_from_dict, load_config, parse_planner
from .plotdata import plotdata
from .runner import noise_sweep, observation_sweep, run_batch, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _planner_arg(value: str) -> str:
    try:
        parse_planner(value)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mtdplan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_flags(p):
        p.add_argument("--config", type=Path, help="YAML experiment document")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--planner", type=_planner_arg,
                       help=f"one of {', '.join(PLANNER_KINDS)} (rule accepts rule:RB)")
        p.add_argument("--episodes", type=int)
        p.add_argument("--workers", type=int)

    experiment_flags(sub.add_parser("run", help="one planner across the observation-rate grid"))
    sweep = sub.add_parser("sweep", help="planner list x observation grid, or the attack-rate noise grid")
    experiment_flags(sweep)
    sweep.add_argument("--noise", action="store_true", help="sweep (true, planner) attack-rate pairs")
    sub.add_parser("validate", help="run the oracle and property checks")
    pd = sub.add_parser("plotdata", help="figure-ready CSV from stored report JSON")
    pd.add_argument("inputs", nargs="+", type=Path)
    pd.add_argument("--out", type=Path, required=True)
    return parser


def _experiment_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("config", "missing required --config PATH")
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if args.planner is not None:
        overrides["planner"] = args.planner
        if args.command == "sweep":
            overrides["planners"] = [args.planner]
    data = cfg.to_dict()
    data.update(overrides)
    return config_from_dict(data)


def _cmd_run(args) -> int:
    cfg = _experiment_config(args)
    reports = [run_batch(cfg, observation_rate=r) for r in cfg.observation_rates]
    json_path, csv_path = write_outputs(reports, cfg, cfg.out_dir, "run")
    print(f"wrote {json_path} and {csv_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    if args.noise:
        planner = args.planner or "pomcp"
        reports = noise_sweep(cfg, planner)
        name = "noise_sweep"
    else:
        reports = observation_sweep(cfg)
        name = "sweep"
    json_path, csv_path = write_outputs(reports, cfg, cfg.out_dir, name)
    print(f"wrote {len(reports)} rows to {csv_path} and {json_path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from ..validation import run_checks
    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME


def _cmd_plotdata(args) -> int:
    for p in args.inputs:
        if not p.exists():
            raise ConfigError("inputs", f"file not found: {p}")
    n = plotdata(args.inputs, args.out)
    print(f"wrote {n} rows to {args.out}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate, "plotdata": _cmd_plotdata}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"mtdplan: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"mtdplan: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure exit code
        print(f"mtdplan: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(cli_main())
