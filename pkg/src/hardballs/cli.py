"""Command line entry point: ``billiard <command> --config FILE [--seed N] [--workers K] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import BilliardError, ConfigError
from .harness import COMMANDS, EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, RunConfig, export, run

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="billiard", description="Hard-ball billiard laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command")
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--workers", type=int, help="override the worker count")
        p.add_argument("--out", help="override output_dir")
    p = sub.add_parser("export", help="re-emit the tables of a finished run")
    p.add_argument("run_dir")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("BILLIARD_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    args = _parser().parse_args(argv)
    if args.command == "export":
        try:
            for path in export(args.run_dir, args.format):
                print(path)
        except BilliardError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK
    try:
        config = RunConfig.load(args.config, args.command)
        config = config.with_overrides(args.seed, args.workers, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    code = run(config)
    if code == EXIT_OK:
        print(config.output_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
