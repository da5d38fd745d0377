"""Console logging for command-line runs."""

from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

__all__ = ["configure_logging"]


def configure_logging(level: int | str = logging.INFO) -> logging.Logger:
    """Route the ``tkrnet`` loggers to a rich handler on stderr.

    Calling it again only changes the level.
    """
    logger = logging.getLogger("tkrnet")
    logger.setLevel(level)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(
            console=Console(stderr=True), show_path=False, log_time_format="[%X]"
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    return logger
