"""ft-optsim command line: check, run, analyze, oracle and sweep."""
import argparse
import importlib
import logging
import sys
import traceback
from typing import Optional, Sequence

from commands import COMMANDS, EXIT_FAILURE, EXIT_USAGE, guarded
from utils import setup_logging, show_error

# Configure logging
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftopt",
        description="Fault-tolerant distributed scalar optimization simulator",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default: FTOPT_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        module = importlib.import_module(f"commands.{name}")
        module.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0
    setup_logging(args.log_level)
    if not getattr(args, "handler", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logger.debug(f"Dispatching {args.command}")
    try:
        return guarded(args.command, args.handler, args)
    except KeyboardInterrupt:
        show_error("interrupted")
        return EXIT_FAILURE
    except Exception as e:
        show_error(f"Application error: {str(e)}")
        logger.error(traceback.format_exc())
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
