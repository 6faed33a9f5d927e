"""
Logging setup for rodstab.

The level comes from RODSTAB_LOG (error | info | debug), read lazily so a
.env file can be loaded first.
"""

import logging
import sys

from config import DEFAULT_LOG_LEVEL, LOG_ENV_VAR, log_level_from_env

LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_FORMAT = "[%(levelname)s] %(name)s: %(message)s"
_configured = False


def setup_logging(level=None):
    """Configure the root logger once. Returns the effective level name."""
    global _configured
    requested = (level or log_level_from_env()).lower()
    name = requested
    bad_name = name not in LEVELS
    if bad_name:
        name = DEFAULT_LOG_LEVEL

    root = logging.getLogger()
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_FORMAT))
        root.addHandler(handler)
        _configured = True
    root.setLevel(LEVELS[name])

    if bad_name:
        logging.getLogger(__name__).warning(
            "Unknown %s value %r, using %s", LOG_ENV_VAR, requested, name)
    return name


def report_failure(source, exc):
    """Log a per-item failure that the caller recovers from (sweeps)."""
    logging.getLogger(source).error("%s: %s", type(exc).__name__, exc)
