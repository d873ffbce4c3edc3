# [file name]: utils/log.py
"""
Console logging: `[Tag] message` lines on stderr.

The level comes from the ATOMSENSE_LOG environment variable, else WARNING;
the CLI raises it to INFO with -v.
"""

import logging
import os
import sys
from typing import Optional

ROOT_LOGGER = "atomsense"
ENV_LEVEL = "ATOMSENSE_LOG"


class TagFormatter(logging.Formatter):
    """Formats records as `[Tag] message` using the last logger-name component."""

    def format(self, record: logging.LogRecord) -> str:
        tag = record.name.rsplit(".", 1)[-1]
        message = record.getMessage()
        if record.levelno >= logging.WARNING:
            message = f"{record.levelname.capitalize()}: {message}"
        line = f"[{tag}] {message}"
        if record.exc_info:
            line = f"{line}\n{self.formatException(record.exc_info)}"
        return line


def setup_logging(level: Optional[str | int] = None) -> logging.Logger:
    """Install the stderr handler once; later calls only change the level."""
    if level is None:
        level = os.environ.get(ENV_LEVEL, "WARNING")
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.WARNING

    root = logging.getLogger(ROOT_LOGGER)
    if not any(getattr(h, "_atomsense", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(TagFormatter())
        handler._atomsense = True
        root.addHandler(handler)
        root.propagate = False
    root.setLevel(level)
    return root


def get_logger(tag: str) -> logging.Logger:
    return logging.getLogger(f"{ROOT_LOGGER}.{tag}")
