"""Command line entry point: ``vertebrate <stage> [--config PATH] [--out DIR] [--strict] [--set K=V]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .pipeline import STAGES, LockError, Run, StageError, run_all, run_lock, run_stage

logger = logging.getLogger("vertebrate")

COMMANDS = (*STAGES, "run-all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vertebrate",
        description="Topic modeling, clade-assisted sentiment labeling and brand reputation analysis.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON (default: bundled synthetic demo)")
    common.add_argument("--out", help="output directory (overrides out_dir in the config)")
    common.add_argument("--strict", action="store_true", help="fail on any invalid input record or assignment")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                        help="override a config value, e.g. --set topics.eps=0.8 (repeatable)")
    common.add_argument("--split-first", action="store_true",
                        help="split before oversampling (only the training fold is balanced)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage" if name != "run-all"
                       else "run every stage in order")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if args.split_first:
        overrides.append("classify.split_first=true")
    try:
        config = load_config(args.config, overrides)
        config.validate()
        run = Run(config, args.out, strict=args.strict)
        with run_lock(run.out):
            if args.command == "run-all":
                run_all(run)
            else:
                run_stage(run, args.command)
    except (ConfigError, StageError, LockError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
