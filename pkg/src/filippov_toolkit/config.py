# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module containing configurations."""

import dataclasses
import itertools
import logging
from enum import Enum

SEED_ENV_VAR = "FILIPPOV_TOOLKIT_SEED"
LOG_DIR_ENV_VAR = "FILIPPOV_TOOLKIT_LOG_DIR"


class IdealKind(str, Enum):
    """Supported negligibility ideals.

    Attributes:
        LEBESGUE_NULL: Sets of measure zero under the active measure model.
        GENERATED: Sets contained in a finite union of listed generators.
    """

    LEBESGUE_NULL = "lebesgue"
    GENERATED = "generated"


class QueryKind(str, Enum):
    """Query blocks of a problem file.

    Attributes:
        ESS_RANGE: Essential range of the right-hand side over a region.
        FILIPPOV_SET: Filippov set at a time and state.
        SOLVE: Integrate the initial value problem.
        VERIFY: Check a trajectory against the inclusion.
    """

    ESS_RANGE = "ess-range"
    FILIPPOV_SET = "filippov-set"
    SOLVE = "solve"
    VERIFY = "verify"


class OutputFormat(str, Enum):
    """Trajectory output formats.

    Attributes:
        STRUCTURED: YAML document with nodes, events, modes and interpolation coefficients.
        TABULAR: Comma separated rows of time, state and mode label.
    """

    STRUCTURED = "structured"
    TABULAR = "tabular"


class ModeKind(str, Enum):
    """Integration modes of a trajectory node.

    Attributes:
        SMOOTH: Flow of a single cell branch.
        SLIDING: Convex combination of branches tangent to the active surfaces.
        STOPPED: The integration ended before the horizon.
    """

    SMOOTH = "smooth"
    SLIDING = "sliding"
    STOPPED = "stopped"


class StopReason(str, Enum):
    """Reasons for the end of an integration.

    Attributes:
        HORIZON: The horizon was reached.
        DOMAIN_EXIT: The state left the domain.
        AMBIGUOUS: A repulsive surface admits more than one continuation.
    """

    HORIZON = "horizon"
    DOMAIN_EXIT = "domain-exit"
    AMBIGUOUS = "ambiguous"


class EventKind(str, Enum):
    """Decisions taken at switching surfaces.

    Attributes:
        CROSSING: The state passes into a neighbouring cell.
        SLIDING_ENTRY: The state starts sliding along the active surfaces.
        SLIDING_EXIT: The state leaves the surfaces it slid along.
        AMBIGUOUS: No continuation is selected.
    """

    CROSSING = "crossing"
    SLIDING_ENTRY = "sliding-entry"
    SLIDING_EXIT = "sliding-exit"
    AMBIGUOUS = "ambiguous"


class ExitCode(int, Enum):
    """Process exit codes of the CLI.

    Attributes:
        OK: The command succeeded.
        PROPERTY_FAILURE: A checked property (inclusion residual) failed.
        CONFIG_ERROR: The problem file or the arguments are invalid.
        IO_ERROR: A file could not be read or written.
    """

    OK = 0
    PROPERTY_FAILURE = 1
    CONFIG_ERROR = 2
    IO_ERROR = 3


@dataclasses.dataclass(frozen=True)
class SurfaceDefaults:
    """Defaults for switching surfaces and null generators.

    Attributes:
        adjacency_tolerance: Switching values within this bound are treated as on the surface.
        gradient_threshold: Minimal gradient norm of a regular surface.
        band: Half width of the band around a surface sampled for the regularity check.
        validation_samples: Number of samples used by load time validations.
    """

    adjacency_tolerance: float = 1e-9
    gradient_threshold: float = 1e-9
    band: float = 1e-6
    validation_samples: int = 10_000


@dataclasses.dataclass(frozen=True)
class RangeDefaults:
    """Defaults for value classification and essential ranges.

    Attributes:
        resolution: Codomain box width of covered essential ranges.
        depth_cap: Maximal number of bisection levels of the codomain cover.
        initial_radius: First neighbourhood radius of the shrinking schedule.
        radius_factor: Division factor between successive neighbourhood radii.
        radius_steps: Number of neighbourhood radii.
        budget: Monte Carlo samples per cell.
        confidence: Confidence level of Monte Carlo bounds.
        max_boxes: Maximal number of codomain boxes kept alive during refinement.
    """

    resolution: float = 1e-3
    depth_cap: int = 20
    initial_radius: float = 1.0
    radius_factor: float = 2.0
    radius_steps: int = 20
    budget: int = 4096
    confidence: float = 0.99
    max_boxes: int = 200_000


@dataclasses.dataclass(frozen=True)
class HullDefaults:
    """Defaults for hulls and Filippov sets.

    Attributes:
        tolerance: Hausdorff tolerance between successive hulls.
        radius_fraction: First ball radius as a fraction of the domain diameter.
        shrink: Ratio between successive ball radii.
        max_steps: Maximal number of ball radii.
        directions: Number of low discrepancy directions of the support direction set.
    """

    tolerance: float = 1e-6
    radius_fraction: float = 0.1
    shrink: float = 0.5
    max_steps: int = 30
    directions: int = 100


@dataclasses.dataclass(frozen=True)
class SolverDefaults:
    """Defaults for the inclusion solver.

    Attributes:
        rtol: Relative local error tolerance.
        atol: Absolute local error tolerance.
        event_tolerance: Time tolerance of event localization.
        max_events: Zeno guard on the number of switching events.
        tangency: Threshold below which a normal velocity is treated as tangential.
        degenerate_normal: Threshold below which a surface normal is degenerate.
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    event_tolerance: float = 1e-10
    max_events: int = 10_000
    tangency: float = 1e-12
    degenerate_normal: float = 1e-9


SURFACE_DEFAULTS = SurfaceDefaults()
RANGE_DEFAULTS = RangeDefaults()
HULL_DEFAULTS = HullDefaults()
SOLVER_DEFAULTS = SolverDefaults()

_LOG_LEVELS = (logging.DEBUG, logging.INFO, logging.WARNING, logging.ERROR)
LOG_LEVELS = tuple(
    str(level)
    for level in itertools.chain(
        _LOG_LEVELS,
        (logging.getLevelName(level) for level in _LOG_LEVELS),
        (logging.getLevelName(level).lower() for level in _LOG_LEVELS),
    )
)
