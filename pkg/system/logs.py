"""Logging setup for the command line and library modules."""

import logging
from typing import Any, Optional

DEFAULT_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"

_configured = False


def setup_logging(level: str = "INFO", fmt: Optional[str] = None) -> None:
    """Configure the root logger once.

    Args:
        level: Level name (DEBUG, INFO, WARNING, ...)
        fmt: Optional format string, defaults to a single-line record
    """
    global _configured
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        numeric = logging.INFO
    if _configured:
        logging.getLogger().setLevel(numeric)
        return
    logging.basicConfig(level=numeric, format=fmt or DEFAULT_FORMAT)
    _configured = True


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def kv(**fields: Any) -> str:
    """Render structured fields as ``key=value`` pairs in a stable order."""
    return " ".join(f"{key}={fields[key]}" for key in sorted(fields))
