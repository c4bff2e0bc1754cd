#!/usr/bin/env python
# coding: utf-8

"""
Logging utilities for CrackTrack.

Every entry point calls `configure_logging` once; library modules then log through the
module-level `logging` functions. A run writes its own `run.log` next to its artifacts:
the handler is attached when the staging directory is created and detached before the
directory is moved into place.
"""

import logging
import os
import sys

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
QUIET_LOGGERS = ("torch",)


def _formatter():
    return logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)


def configure_logging(log_file=None, verbose=False):
    """
    Configure the root logger for console and optional file output.

    The root logger always records INFO so that run logs are complete; only the console
    handler is quiet (WARNING) unless `verbose` is set.

    Args:
        log_file (str, optional): Extra log file kept across runs. If None, only the console is configured.
        verbose (bool, optional): DEBUG level on the console when True, WARNING otherwise.

    Returns:
        logging.Logger: The configured root logger
    """
    console_level = logging.DEBUG if verbose else logging.WARNING

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG if verbose else logging.INFO)

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(console_level)
    console_handler.setFormatter(_formatter())
    root_logger.addHandler(console_handler)

    if log_file:
        parent = os.path.dirname(log_file)
        try:
            if parent:
                os.makedirs(parent, exist_ok=True)
            attach_file_handler(log_file)
        except OSError as e:
            logging.warning(f"Could not open log file {log_file}: {e}; console logging only")

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logging.debug(f"Console logging at {logging.getLevelName(console_level)}")
    return root_logger


def attach_file_handler(path):
    """Add an INFO file handler writing to `path` and return it."""
    handler = logging.FileHandler(path)
    handler.setLevel(logging.INFO)
    handler.setFormatter(_formatter())
    logging.getLogger().addHandler(handler)
    return handler


def detach_file_handlers():
    """Close and remove every file handler of the root logger (before moving a run directory)."""
    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        if isinstance(handler, logging.FileHandler):
            root_logger.removeHandler(handler)
            handler.close()
