"""
QAA Logging
Console loggers tagged `[qaa.<module>]`, installed through coloredlogs.
"""
import logging

import coloredlogs

from .config import QaaConfig

LOG_FORMAT = "[%(name)s] %(message)s"


def get_logger(name):
    """Logger for a module; pass `__name__`."""
    if not name.startswith("qaa"):
        name = f"qaa.{name}"
    return logging.getLogger(name)


def setup_logging(level=None, stream=None):
    level = (level or QaaConfig.LOG_LEVEL).upper()
    coloredlogs.install(level=level, fmt=LOG_FORMAT, logger=logging.getLogger("qaa"), stream=stream)
    logging.getLogger("numba").setLevel(logging.WARNING)
