"""Command-line entry point for driving experiments from INI configs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import expand_sweep, load_config
from .pipeline import StageError, aggregate_reports, run_pipeline

_STAGE_COMMANDS = ("fom", "pod", "train", "assimilate")
_COMMANDS = _STAGE_COMMANDS + ("sweep", "report")


def _add_common(parser, suppress: bool) -> None:
    # Subparser copies default to SUPPRESS so an omitted flag does not
    # clobber a value given before the subcommand.
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=Path, default=default,
                        help="experiment INI file")
    parser.add_argument("--output", type=Path, default=default,
                        help="override the configured output directory")
    parser.add_argument("--seed", type=int, default=default,
                        help="override the configured seed")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="romnudge",
        description="Reduced-order Burgers forecasts with learned "
                    "measurement-driven corrections.",
    )
    parser.add_argument("--stage", choices=_COMMANDS, default=None,
                        help="run this stage (alternative to the subcommand)")
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command")
    helps = {
        "fom": "solve the full-order model and store snapshots",
        "pod": "extract the modal basis and project the model operators",
        "train": "build the training set and fit the correction network",
        "assimilate": "run the corrected forecast and write CSV results",
        "sweep": "expand value lists into child runs and execute them all",
        "report": "aggregate child run results into summary.csv",
    }
    for name in _COMMANDS:
        _add_common(sub.add_parser(name, help=helps[name]), suppress=True)
    return parser


def _fail(stage: str, message: str) -> int:
    print(f"[{stage}] {message}", file=sys.stderr)
    return 1


def _print_report(report) -> None:
    for stage, seconds in report.timings.items():
        print(f"{stage}: {seconds:.2f} s")
    for key in ("retained_energy", "epochs_used", "final_rmse_background",
                "final_rmse_nudged"):
        if key in report.summary:
            print(f"{key}: {report.summary[key]}")
    print(f"report: {Path(report.output_dir) / 'report.json'}")


def _run_stage(command: str, args) -> int:
    try:
        cfg = load_config(args.config, output_dir=args.output, seed=args.seed)
    except ValueError as exc:
        return _fail("config", str(exc))
    try:
        report = run_pipeline(cfg, last_stage=command)
    except StageError as exc:
        return _fail(exc.stage, str(exc))
    _print_report(report)
    return 0


def _run_sweep(args) -> int:
    try:
        runs = expand_sweep(args.config, output_dir=args.output,
                            seed=args.seed)
    except ValueError as exc:
        return _fail("config", str(exc))
    parent = Path(runs[0][1].output_dir).parent
    for label, cfg in runs:
        print(f"--- {label}")
        try:
            report = run_pipeline(cfg)
        except StageError as exc:
            return _fail(exc.stage, f"{label}: {exc}")
        _print_report(report)
    table = aggregate_reports(parent)
    print(f"summary: {table}")
    return 0


def _run_report(args) -> int:
    if args.output is not None:
        parent = args.output
    elif args.config is not None:
        try:
            parent = Path(load_config(args.config).output_dir)
        except ValueError as exc:
            # Sweep files hold value lists; their common parent is the
            # configured output directory itself.
            try:
                runs = expand_sweep(args.config)
            except ValueError:
                return _fail("config", str(exc))
            parent = Path(runs[0][1].output_dir).parent
    else:
        return _fail("report", "need --output or --config to locate runs")
    try:
        table = aggregate_reports(parent)
    except FileNotFoundError as exc:
        return _fail("report", str(exc))
    print(f"summary: {table}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    command = args.command if args.command is not None else args.stage
    if command is None:
        parser.print_help()
        return 2
    if (args.stage is not None and args.command is not None
            and args.stage != args.command):
        return _fail("config",
                     f"--stage {args.stage} conflicts with subcommand "
                     f"{args.command}")
    if command != "report" and args.config is None:
        return _fail("config", f"{command} needs --config")
    if command in _STAGE_COMMANDS:
        return _run_stage(command, args)
    if command == "sweep":
        return _run_sweep(args)
    return _run_report(args)


if __name__ == "__main__":
    sys.exit(main())
