"""Command-line entry point: ``acmagsim --scenario time-sweep --out-dir out``."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from rich.console import Console
from rich.table import Table as RichTable

from acmagsim import __version__
from acmagsim.errors import AcMagError, ConfigError
from acmagsim.experiments.config import DEFAULT_OUT_DIR, SCENARIOS, validate_config
from acmagsim.experiments.scenarios import run_scenario
from acmagsim.logging_config import LogTags, logger
from acmagsim.model.validator import Violation


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acmagsim",
        description="AC magnetometry with dynamical-decoupling sequences: "
                    "signals, shot noise, fits and sensitivity.")
    parser.add_argument("--scenario", choices=sorted(SCENARIOS),
                        help="scenario to run (overrides the config file)")
    parser.add_argument("--config", metavar="<file>", help="TOML scenario configuration")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config file)")
    parser.add_argument("--out-dir", metavar="<dir>", help="output directory")
    parser.add_argument("--threads", type=int, help="worker threads for sweep points")
    parser.add_argument("--verbose", action="store_true", help="log everything at debug level")
    parser.add_argument("--list", action="store_true", help="list scenarios and exit")
    parser.add_argument("--version", action="version", version=f"acmagsim {__version__}")
    return parser


def print_scenarios(console: Console) -> None:
    table = RichTable(title="Scenarios")
    table.add_column("id", style="bold")
    table.add_column("description")
    for name, description in SCENARIOS.items():
        table.add_row(name, description)
    console.print(table)


def _fail(error: AcMagError) -> int:
    print(json.dumps(error.to_dict(), sort_keys=True))
    return 2 if isinstance(error, ConfigError) else 1


def main(argv: Optional[List[str]] = None) -> int:
    """Run one scenario. Exit code 0 on success, nonzero with an error JSON on stdout."""
    args = build_parser().parse_args(argv)

    logger.enable_tags(LogTags.SCENARIO, LogTags.CONFIG)
    if args.verbose:
        logger.enable_tags(LogTags.ALL)
        logger.set_level(logging.DEBUG)

    if args.list:
        print_scenarios(Console())
        return 0

    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            return _fail(ConfigError([Violation("config", f"cannot read {args.config}: {exc}")]))

    overrides = {"scenario": args.scenario, "seed": args.seed, "out_dir": args.out_dir,
                 "threads": args.threads}
    try:
        config = validate_config(text, overrides)
        run = run_scenario(config)
    except AcMagError as error:
        logger.error(LogTags.SCENARIO, "%s", error)
        return _fail(error)
    except Exception as exc:
        logger.error(LogTags.SCENARIO, "unexpected failure: %s", exc)
        print(json.dumps({"error": "internal_error", "message": f"{type(exc).__name__}: {exc}"},
                         sort_keys=True))
        return 1

    print(json.dumps({"scenario": config.scenario, "out_dir": config.out_dir or DEFAULT_OUT_DIR,
                      "files": [str(p) for p in run.paths]}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
