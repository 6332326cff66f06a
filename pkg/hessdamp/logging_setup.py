"""Logging configuration shared by the console commands."""

from __future__ import annotations

import logging
import os

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str | int | None = None) -> None:
    """Install a single stream handler on the ``hessdamp`` logger.

    The level falls back to ``HESSDAMP_LOG_LEVEL`` and then to INFO.
    """
    if level is None:
        level = os.getenv("HESSDAMP_LOG_LEVEL", "INFO")
    if isinstance(level, str):
        level = level.upper()

    logger = logging.getLogger("hessdamp")
    logger.setLevel(level)
    if not any(getattr(h, "_hessdamp", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._hessdamp = True
        logger.addHandler(handler)
