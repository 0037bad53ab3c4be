"""Logging configuration module."""

import logging
import os
import sys

# Default log level from environment
DEFAULT_LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")

_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
_DATEFMT = "%Y-%m-%d %H:%M:%S"


def get_logger(name: str) -> logging.Logger:
    """
    Get a configured logger.

    Args:
        name: Logger name (typically __name__)

    Returns:
        Configured logger instance.
    """
    logger = logging.getLogger(name)

    # Only configure if no handlers exist (avoid duplicate handlers)
    if not logger.handlers:
        logger.setLevel(getattr(logging, DEFAULT_LOG_LEVEL.upper(), logging.WARNING))

        handler = logging.StreamHandler(sys.stderr)
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(logging.Formatter(_FORMAT, datefmt=_DATEFMT))
        logger.addHandler(handler)
        # Numerics log per call; keep them out of the root logger's handlers
        logger.propagate = False

    return logger


def set_level(level: str) -> None:
    """
    Change the level of every logger created through get_logger.

    Args:
        level: Level name such as "DEBUG" or "INFO"
    """
    value = getattr(logging, level.upper(), None)
    if not isinstance(value, int):
        raise ValueError(f"Unknown log level: {level}")
    for name in list(logging.root.manager.loggerDict):
        if name.startswith("src."):
            logging.getLogger(name).setLevel(value)
