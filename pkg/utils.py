import json
import logging
import os
import sys
import time
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
from dotenv import load_dotenv

# Configure logging
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
logger = logging.getLogger(__name__)

load_dotenv()

# Defaults for settings read from the environment / .env
DEFAULT_SETTINGS: Dict[str, str] = {
    "FTOPT_ENUMERATION_BUDGET": "1000000",
    "FTOPT_DATABASE_URL": "sqlite:///ftopt_results.db",
    "FTOPT_LOG_LEVEL": "INFO",
    "FTOPT_OUTPUT_DIR": "out",
    "FTOPT_MEMBERSHIP_TOL": "1e-3",
    "FTOPT_PI_THRESHOLD": "1e-6",
}


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging once for the CLI."""
    level_name = (level or get_setting("FTOPT_LOG_LEVEL")).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


# Configuration
def get_setting(name: str, default: Optional[str] = None) -> str:
    """Look up a setting in the environment, falling back to the built-in default."""
    fallback = default if default is not None else DEFAULT_SETTINGS.get(name)
    value = os.getenv(name, fallback)
    if value is None:
        raise KeyError(f"Unknown setting {name}")
    return value


def get_int_setting(name: str) -> int:
    return int(float(get_setting(name)))


def get_float_setting(name: str) -> float:
    return float(get_setting(name))


def enumeration_budget(override: Optional[int] = None) -> int:
    """Enumeration cap for reduced-graph families."""
    if override is not None:
        return int(override)
    return get_int_setting("FTOPT_ENUMERATION_BUDGET")


# Console Helpers
def show_success(message: str) -> None:
    """Report a success message on the console."""
    print(f"[ok] {message}", file=sys.stderr)
    logger.info(f"Success: {message}")


def show_error(message: str) -> None:
    """Report an error message on the console."""
    print(f"[error] {message}", file=sys.stderr)
    logger.error(f"Error: {message}")


def show_warning(message: str) -> None:
    """Report a warning message on the console."""
    print(f"[warning] {message}", file=sys.stderr)
    logger.warning(f"Warning: {message}")


def show_info(message: str) -> None:
    """Report an info message on the console."""
    print(f"[info] {message}", file=sys.stderr)
    logger.info(f"Info: {message}")


# Randomness
def agent_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Independent generator for one (seed, agent, round, ...) key.

    Streams do not depend on the order in which agents are visited, so a
    replay with the same seed reproduces every draw.
    """
    return np.random.default_rng([int(seed)] + [int(k) for k in keys])


# Output Helpers
def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays, sets and tuples into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return [to_jsonable(v) for v in sorted(value)]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def canonical_json(payload: Any) -> str:
    """Serialise with sorted keys so equal payloads give equal bytes."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_text_atomic(path: Union[str, Path], text: str) -> Path:
    """Write text through a temporary file and rename it into place."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    os.replace(tmp, target)
    logger.info(f"Wrote {target}")
    return target


def write_json(path: Union[str, Path], payload: Any) -> Path:
    return write_text_atomic(path, canonical_json(payload))


def read_json(path: Union[str, Path]) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def parse_agent_list(text: Optional[str]) -> Sequence[int]:
    """Parse '1,3,5' into [1, 3, 5]; empty or None gives []."""
    if not text:
        return []
    return [int(part) for part in text.split(",") if part.strip()]


# Performance Helpers
def timed(func: Callable) -> Callable:
    """Log the wall-clock time of a call at DEBUG level."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            elapsed = time.perf_counter() - start
            logger.debug(f"{func.__name__} took {elapsed:.3f}s")
    return wrapper
