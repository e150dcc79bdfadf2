"""
Logging Configuration and Setup
Routes progress lines to stderr so stdout stays clean for piping.
"""
import logging
import sys
from typing import Optional

from config import LOG_LEVEL

LOG_FORMAT = "[%(name)s] %(message)s"

_handler: Optional[logging.Handler] = None


def setup_logging(level: Optional[str] = None, debug: bool = False) -> None:
    """
    Configure the root logger; calling it again replaces the previous stderr handler.

    Args:
        level: Level name (defaults to config.LOG_LEVEL, i.e. SAIL_LOG_LEVEL)
        debug: Force DEBUG regardless of level
    """
    global _handler
    resolved = "DEBUG" if debug else (level or LOG_LEVEL).upper()

    root = logging.getLogger()
    if _handler is not None:
        root.removeHandler(_handler)

    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(_handler)
    root.setLevel(resolved)


def get_logger(component: str) -> logging.Logger:
    """Logger tagged with a component name, e.g. get_logger("Trainer")."""
    return logging.getLogger(component)
