# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Fixtures for the Filippov toolkit tests."""

from pathlib import Path

import pytest
from pytest import Parser

from filippov_toolkit import config


def pytest_addoption(parser: Parser):
    """Add options to pytest parser.

    Args:
        parser: The pytest argument parser.
    """
    parser.addoption(
        "--toolkit-command",
        action="store",
        help="The installed filippov-toolkit executable to run end to end tests against.",
        default="filippov-toolkit",
    )


@pytest.fixture(scope="function", name="log_dir", autouse=True)
def log_dir_fixture(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Point the toolkit log files at a temporary directory."""
    log_dir = tmp_path / "log"
    monkeypatch.setenv(config.LOG_DIR_ENV_VAR, str(log_dir))
    return log_dir
