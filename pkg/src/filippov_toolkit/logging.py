# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Configure logging for the Filippov toolkit."""

import logging
import os
import pathlib

from filippov_toolkit.config import LOG_DIR_ENV_VAR

DEFAULT_LOG_FILE_DIR = pathlib.Path.home() / ".filippov-toolkit/log"
LOG_FILE_NAME = "info.log"
ERROR_LOG_FILE_NAME = "error.log"


def get_log_dir() -> pathlib.Path:
    """Resolve the directory the log files are written to.

    Returns:
        The directory from the environment override, or the default one.
    """
    override = os.environ.get(LOG_DIR_ENV_VAR, "")
    return pathlib.Path(override) if override else DEFAULT_LOG_FILE_DIR


def configure(log_level: str | int) -> None:
    """Configure the global log configurations.

    Args:
        log_level: The logging verbosity level to apply.
    """
    log_dir = get_log_dir()
    log_dir.mkdir(parents=True, exist_ok=True)
    level = log_level.upper() if isinstance(log_level, str) else log_level
    if isinstance(level, str) and level.isdigit():
        level = int(level)
    log_handler = logging.FileHandler(filename=log_dir / LOG_FILE_NAME, encoding="utf-8")
    log_handler.setLevel(level)
    error_log_handler = logging.FileHandler(
        filename=log_dir / ERROR_LOG_FILE_NAME, encoding="utf-8"
    )
    error_log_handler.setLevel(logging.ERROR)
    logging.basicConfig(
        level=level,
        handlers=(log_handler, error_log_handler),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        encoding="utf-8",
        force=True,
    )
