"""Command-line entry point: ``discs <scenario> <config.json> [options]``.

Exit status is 0 when every check passes, 1 when a check fails (results
are still written) and 2 when the config or its file cannot be used.
"""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from app.core.config import settings
from app.services.scenarios import SCENARIO_CONFIGS, load_scenario, run

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser.

    Returns:
        argparse.ArgumentParser: Parser for the ``discs`` command.
    """
    parser = argparse.ArgumentParser(prog="discs", description="Run an analytic-disc scenario from a JSON config.")
    parser.add_argument("scenario", choices=sorted(SCENARIO_CONFIGS), help="Scenario to run")
    parser.add_argument("config", type=Path, help="Path to the JSON config")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default: results/<scenario>)")
    parser.add_argument("--grid-size", type=int, default=None, help="Override the grid size")
    parser.add_argument("--tol", type=float, default=None, help="Override the solver tolerance")
    parser.add_argument("--verbose", action="store_true", help="Log solver iterations")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI.

    Args:
        argv: Arguments without the program name; ``sys.argv[1:]`` by default.

    Returns:
        int: Process exit status.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else settings.LOG_LEVEL)
    try:
        scenario = load_scenario(args.scenario, args.config, out=args.out, grid_size=args.grid_size, tol=args.tol)
    except (ValidationError, json.JSONDecodeError) as exc:
        logger.error("Invalid config %s: %s", args.config, exc)  # noqa: TRY400
        return EXIT_BAD_INPUT
    except OSError as exc:
        logger.error("Cannot read config %s: %s", args.config, exc)  # noqa: TRY400
        return EXIT_BAD_INPUT
    try:
        result = run(scenario)
    except OSError as exc:
        logger.error("Cannot write results to %s: %s", scenario.output_dir, exc)  # noqa: TRY400
        return EXIT_BAD_INPUT
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
