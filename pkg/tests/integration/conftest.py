# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Fixtures for Filippov toolkit end to end tests."""

import logging
import shutil
from pathlib import Path

import pytest

logger = logging.getLogger(__name__)

PROBLEMS_DIR = Path(__file__).parent / "problems"


@pytest.fixture(scope="module", name="toolkit_command")
def toolkit_command_fixture(pytestconfig: pytest.Config) -> str:
    """The installed filippov-toolkit executable."""
    command = pytestconfig.getoption("--toolkit-command")
    assert shutil.which(command), f"Please install {command} or pass --toolkit-command"
    return command


@pytest.fixture(scope="function", name="problems")
def problems_fixture(tmp_path: Path) -> Path:
    """A writable copy of the sample problem files."""
    target = tmp_path / "problems"
    shutil.copytree(PROBLEMS_DIR, target)
    logger.info("Copied sample problems to %s.", target)
    return target
