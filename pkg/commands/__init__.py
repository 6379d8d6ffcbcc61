"""
CLI subcommands. Each module exposes ``cmd_<name>(args) -> int`` and
``register(subparsers)``; ``main.py`` wires them into one parser.
"""
import argparse
import logging
import traceback
from pathlib import Path
from typing import Any, Callable, Optional

from exceptions import FtOptSimError, IncompatibleScenario, InvalidParams, ParseError, PreconditionError
from utils import canonical_json, get_setting, show_error, write_json

# Configure logging
logger = logging.getLogger(__name__)

COMMANDS = ("check", "run", "analyze", "oracle", "sweep")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CERTIFICATION = 3


def common_parser() -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--out", default=None, help="output directory (default: FTOPT_OUTPUT_DIR)")
    parser.add_argument("--budget", type=int, default=None, help="enumeration cap for reduced graphs")
    parser.add_argument("--assert", dest="assert_", action="store_true",
                        help="exit with status 3 when a certification or feasibility check fails")
    return parser


def output_dir(args: argparse.Namespace) -> Path:
    return Path(args.out if getattr(args, "out", None) else get_setting("FTOPT_OUTPUT_DIR"))


def optional_output(args: argparse.Namespace, name: str) -> Optional[Path]:
    """File under --out when the flag was given, else None."""
    return Path(args.out) / name if getattr(args, "out", None) else None


def emit(payload: Any, path: Optional[Path] = None) -> None:
    """Print canonical JSON to stdout and optionally store the same bytes."""
    if path is not None:
        write_json(path, payload)
    print(canonical_json(payload), end="")


def exit_code_for(e: Exception) -> int:
    if isinstance(e, (ParseError, IncompatibleScenario, PreconditionError, InvalidParams)):
        return EXIT_USAGE
    return EXIT_FAILURE


def guarded(name: str, func: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Run a command, turning raised errors into an exit status."""
    try:
        return func(args)
    except FtOptSimError as e:
        show_error(f"{name}: {str(e)}")
        logger.debug(traceback.format_exc())
        return exit_code_for(e)
    except Exception as e:
        show_error(f"{name} failed: {str(e)}")
        logger.error(traceback.format_exc())
        return EXIT_FAILURE
