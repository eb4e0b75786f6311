# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Unit tests for config module."""

import pytest

from filippov_toolkit import config
from filippov_toolkit.config import ExitCode, IdealKind, OutputFormat, QueryKind


@pytest.mark.parametrize(
    "text, expected",
    [
        pytest.param("lebesgue", IdealKind.LEBESGUE_NULL, id="lebesgue"),
        pytest.param("generated", IdealKind.GENERATED, id="generated"),
    ],
)
def test_ideal_kind_from_text(text: str, expected: IdealKind):
    """
    arrange: given the ideal names used in problem files.
    act: when they are converted.
    assert: the matching ideal kind is returned.
    """
    assert IdealKind(text) == expected


def test_query_kinds():
    """
    arrange: none.
    act: when the query kinds are listed.
    assert: every command of the CLI has a query kind.
    """
    assert sorted(kind.value for kind in QueryKind) == [
        "ess-range",
        "filippov-set",
        "solve",
        "verify",
    ]


def test_exit_codes():
    """
    arrange: none.
    act: when the exit codes are read.
    assert: they follow the documented numbering.
    """
    assert [int(code) for code in ExitCode] == [0, 1, 2, 3]
    assert OutputFormat("tabular") == OutputFormat.TABULAR


def test_defaults():
    """
    arrange: none.
    act: when the default tolerances are read.
    assert: they are ordered the way the computations expect.
    """
    assert config.SOLVER_DEFAULTS.atol < config.SOLVER_DEFAULTS.rtol
    assert 0.0 < config.HULL_DEFAULTS.shrink < 1.0
    assert config.RANGE_DEFAULTS.radius_factor > 1.0
    assert config.SURFACE_DEFAULTS.band > config.SURFACE_DEFAULTS.adjacency_tolerance


@pytest.mark.parametrize(
    "level",
    [
        pytest.param("DEBUG", id="upper case"),
        pytest.param("info", id="lower case"),
        pytest.param("30", id="numeric"),
    ],
)
def test_log_levels(level: str):
    """
    arrange: given log level spellings.
    act: when they are looked up.
    assert: every spelling is accepted.
    """
    assert level in config.LOG_LEVELS
