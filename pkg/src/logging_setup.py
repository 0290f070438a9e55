from __future__ import annotations

import logging
import sys

import coloredlogs

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def configure_logging(level: str = "WARNING") -> None:
    """Install coloured console logging for the ``src`` logger tree.

    Logs go to stderr; stdout is reserved for command output.
    """
    logger = logging.getLogger("src")
    coloredlogs.install(
        level=level.upper(),
        logger=logger,
        fmt=LOG_FORMAT,
        stream=sys.stderr,
    )
    logger.propagate = False
