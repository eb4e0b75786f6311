# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for run reports and the serialization of ranges, hulls and trajectories."""

import contextlib
import dataclasses
import itertools
import logging
import pathlib
from typing import Any, Iterator, Mapping

import jinja2
import numpy as np
import yaml

from filippov_toolkit import filippov
from filippov_toolkit.config import EventKind, ModeKind, StopReason
from filippov_toolkit.convex import ConvexApprox
from filippov_toolkit.errors import FileAccessError, ProblemFileError
from filippov_toolkit.essential import CanonicalNullSet, EssentialRange, PointClass
from filippov_toolkit.piecewise import CellId
from filippov_toolkit.region import DegenerateBox, Generator, PointList, SurfaceGenerator
from filippov_toolkit.solver import Event, Mode, Node, ResidualReport, Trajectory
from filippov_toolkit.stepper import HermiteSegment

logger = logging.getLogger(__name__)

PACKAGE_LOGGER = "filippov_toolkit"


@dataclasses.dataclass
class RunReport:
    """Outcome of one command.

    Attributes:
        command: The command echo.
        config_hash: Digest of the canonicalized problem file.
        results: The results payload.
        warnings: Degraded outcomes reported by the computation, each once.
        wall_time: Elapsed seconds.
    """

    command: str
    config_hash: str
    results: dict[str, Any] = dataclasses.field(default_factory=dict)
    warnings: list[str] = dataclasses.field(default_factory=list)
    wall_time: float = 0.0

    def payload(self) -> str:
        """The results payload alone, free of timing.

        Returns:
            The YAML text of the results.
        """
        return yaml.safe_dump(self.results, sort_keys=True)

    def dump(self) -> str:
        """The full report.

        Returns:
            The YAML document.
        """
        return yaml.safe_dump(dataclasses.asdict(self), sort_keys=True)


class _WarningCollector(logging.Handler):
    """Handler keeping the distinct warning messages in order."""

    def __init__(self) -> None:
        """Initialize the handler."""
        super().__init__(level=logging.WARNING)
        self.messages: dict[str, None] = {}

    def emit(self, record: logging.LogRecord) -> None:
        """Record a warning.

        Args:
            record: The log record.
        """
        if record.levelno == logging.WARNING:
            self.messages[record.getMessage()] = None


@contextlib.contextmanager
def collect_warnings() -> Iterator[list[str]]:
    """Gather the warnings logged by the toolkit inside the block.

    Yields:
        A list filled with the distinct messages when the block exits.
    """
    collector = _WarningCollector()
    package_logger = logging.getLogger(PACKAGE_LOGGER)
    level = package_logger.level
    package_logger.setLevel(min(package_logger.getEffectiveLevel(), logging.WARNING))
    package_logger.addHandler(collector)
    messages: list[str] = []
    try:
        yield messages
    finally:
        package_logger.removeHandler(collector)
        package_logger.setLevel(level)
        messages.extend(collector.messages)


def _floats(values: Any) -> list[float]:
    """Plain float list of a vector.

    Args:
        values: A sequence or array.

    Returns:
        The floats.
    """
    return [float(value) for value in np.asarray(values, dtype=np.float64).ravel()]


def generator_to_dict(generator_: Generator) -> dict[str, Any]:
    """Serialize a null generator in problem file notation.

    Args:
        generator_: The generator.

    Returns:
        The where block.
    """
    match generator_:
        case SurfaceGenerator(expr=expr):
            return {"expression": expr.text}
        case DegenerateBox(lower=lower, upper=upper):
            return {"box": {"lower": _floats(lower), "upper": _floats(upper)}}
    assert isinstance(generator_, PointList)  # nosec
    return {"points": [_floats(point) for point in generator_.points]}


def range_to_dict(result: EssentialRange) -> dict[str, Any]:
    """Serialize an essential range.

    Args:
        result: The range.

    Returns:
        Exact values or a box cover with its flags.
    """
    document: dict[str, Any] = {
        "resolution": float(result.resolution),
        "resolution_reached": result.resolution_reached,
        "low_confidence": result.low_confidence,
    }
    if result.is_exact:
        document["values"] = [_floats(value) for value in result.values or ()]
    else:
        document["boxes"] = [
            {"lower": _floats(lower), "upper": _floats(upper)} for lower, upper in result.boxes
        ]
        document["representatives"] = [_floats(value) for value in result.representatives]
    return document


def null_set_to_dict(null_set: CanonicalNullSet) -> dict[str, Any]:
    """Serialize a canonical null set.

    Args:
        null_set: The null set.

    Returns:
        The generators and whether the outside of a support is removed.
    """
    return {
        "generators": [generator_to_dict(item) for item in null_set.components.generators],
        "outside_support": null_set.outside_support is not None,
    }


def classification_to_dict(result: PointClass) -> dict[str, Any]:
    """Serialize a value classification.

    Args:
        result: The classification.

    Returns:
        The verdict with its witness.
    """
    return {
        "value": _floats(result.value),
        "verdict": result.verdict.value,
        "radius": float(result.radius),
        "measure_lower_bound": float(result.measure_lower_bound),
        "low_confidence": result.low_confidence,
        "surface_limit": result.surface_limit,
    }


def hull_to_dict(hull: ConvexApprox) -> dict[str, Any]:
    """Serialize a convex set.

    Args:
        hull: The set.

    Returns:
        Ordered vertices for exact sets, a direction and value table otherwise.
    """
    document: dict[str, Any] = {"dim": hull.dim, "tolerance": float(hull.tolerance)}
    if hull.vertices is not None:
        document["vertices"] = [_floats(vertex) for vertex in hull.vertices]
    else:
        document["support"] = [
            {"direction": list(direction), "value": value}
            for direction, value in filippov.support_table(hull)
        ]
    return document


def residual_to_dict(report: ResidualReport) -> dict[str, Any]:
    """Serialize a residual report.

    Args:
        report: The report.

    Returns:
        The verdict, the maximum and the per sample violations.
    """
    return {
        "passed": report.passed,
        "max_violation": float(report.max_violation),
        "tolerance": float(report.tolerance),
        "samples": [
            {"t": float(t), "violation": float(value)}
            for t, value in zip(report.times, report.violations)
        ],
    }


def _mode_to_dict(mode: Mode) -> dict[str, Any]:
    """Serialize a mode.

    Args:
        mode: The mode.

    Returns:
        The mode fields.
    """
    return {
        "kind": mode.kind.value,
        "label": mode.label,
        "cells": [cell.signs for cell in mode.cells],
        "active": list(mode.active),
        "weights": _floats(mode.weights),
        "reason": None if mode.reason is None else mode.reason.value,
    }


def trajectory_to_dict(trajectory: Trajectory) -> dict[str, Any]:
    """Serialize a trajectory with its dense output.

    Args:
        trajectory: The trajectory.

    Returns:
        Nodes, events, the stop reason and the Hermite data of every segment.
    """
    return {
        "stop": trajectory.stop.value,
        "nodes": [
            {"t": float(node.t), "x": _floats(node.x), "mode": _mode_to_dict(node.mode)}
            for node in trajectory.nodes
        ],
        "events": [
            {
                "t": float(event.t),
                "surfaces": list(event.surfaces),
                "kind": event.kind.value,
                "tangential": event.tangential,
            }
            for event in trajectory.events
        ],
        "segments": [
            {
                "t0": float(segment.t0),
                "t1": float(segment.t1),
                "x0": _floats(segment.x0),
                "x1": _floats(segment.x1),
                "dx0": _floats(segment.dx0),
                "dx1": _floats(segment.dx1),
            }
            for segment in trajectory.segments
        ],
    }


def _array(values: Any) -> np.ndarray:
    """Read a float vector.

    Args:
        values: A list of numbers.

    Returns:
        The array.
    """
    return np.asarray([float(value) for value in values], dtype=np.float64)


def _mode_from_dict(document: Mapping[str, Any]) -> Mode:
    """Rebuild a mode.

    Args:
        document: The serialized mode.

    Returns:
        The mode.
    """
    reason = document.get("reason")
    return Mode(
        kind=ModeKind(document["kind"]),
        cells=tuple(CellId(str(signs)) for signs in document.get("cells", [])),
        active=tuple(int(index) for index in document.get("active", [])),
        weights=tuple(float(value) for value in document.get("weights", [])),
        reason=None if reason is None else StopReason(reason),
    )


def trajectory_from_dict(document: Mapping[str, Any]) -> Trajectory:
    """Rebuild a trajectory written by trajectory_to_dict.

    Args:
        document: The serialized trajectory.

    Raises:
        ProblemFileError: If a field is missing or malformed.

    Returns:
        The trajectory.
    """
    try:
        nodes = tuple(
            Node(
                t=float(item["t"]),
                x=tuple(float(value) for value in item["x"]),
                mode=_mode_from_dict(item["mode"]),
            )
            for item in document["nodes"]
        )
        segments = tuple(
            HermiteSegment(
                t0=float(item["t0"]),
                t1=float(item["t1"]),
                x0=_array(item["x0"]),
                x1=_array(item["x1"]),
                dx0=_array(item["dx0"]),
                dx1=_array(item["dx1"]),
            )
            for item in document["segments"]
        )
        events = tuple(
            Event(
                t=float(item["t"]),
                surfaces=tuple(int(index) for index in item["surfaces"]),
                kind=EventKind(item["kind"]),
                tangential=bool(item.get("tangential", False)),
            )
            for item in document.get("events", [])
        )
        stop = StopReason(document.get("stop", StopReason.HORIZON.value))
    except (TypeError, KeyError, ValueError) as exc:
        logger.exception("Malformed trajectory document.")
        raise ProblemFileError("Malformed trajectory document", field="trajectory") from exc
    times = [node.t for node in nodes]
    bounds = [bound for segment in segments for bound in (segment.t0, segment.t1)]
    if any(later <= earlier for earlier, later in itertools.pairwise(times)) or any(
        later < earlier for earlier, later in itertools.pairwise(bounds)
    ):
        logger.error("Trajectory times are not increasing.")
        raise ProblemFileError("Trajectory times are not increasing", field="trajectory")
    return Trajectory(nodes=nodes, segments=segments, events=events, stop=stop)


def load_trajectory(path: pathlib.Path) -> Trajectory:
    """Read a trajectory from a solve report or a bare trajectory document.

    Args:
        path: The file path.

    Raises:
        FileAccessError: If the file cannot be read.
        ProblemFileError: If the file is not a trajectory.

    Returns:
        The trajectory.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        logger.exception("Unable to read %s.", path)
        raise FileAccessError(f"Unable to read trajectory file {path}") from exc
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        logger.exception("Invalid YAML in %s.", path)
        raise ProblemFileError("Invalid trajectory YAML", field="trajectory") from exc
    if isinstance(document, Mapping) and isinstance(document.get("results"), Mapping):
        document = document["results"].get("trajectory")
    if not isinstance(document, Mapping):
        raise ProblemFileError("File holds no trajectory", field="trajectory")
    return trajectory_from_dict(document)


def _environment() -> jinja2.Environment:
    """Template environment over the packaged templates.

    Returns:
        The environment.
    """
    return jinja2.Environment(
        loader=jinja2.PackageLoader("filippov_toolkit", "templates"),
        autoescape=jinja2.select_autoescape(),
        keep_trailing_newline=True,
    )


def trajectory_table(trajectory: Trajectory) -> str:
    """Flat table of the nodes: time, state components and mode label.

    Args:
        trajectory: The trajectory.

    Returns:
        The CSV text.
    """
    dim = len(trajectory.nodes[0].x) if trajectory.nodes else 0
    template = _environment().get_template("trajectory.csv.j2")
    return template.render(
        COLUMNS=[f"x{index + 1}" for index in range(dim)],
        ROWS=[
            (repr(float(node.t)), [repr(float(value)) for value in node.x], node.mode.label)
            for node in trajectory.nodes
        ],
    )


def hull_table(hull: ConvexApprox) -> str:
    """Flat table of support values over the fixed direction set.

    Args:
        hull: The convex set.

    Returns:
        The CSV text.
    """
    template = _environment().get_template("hull.csv.j2")
    return template.render(
        COLUMNS=[f"d{index + 1}" for index in range(hull.dim)],
        ROWS=[
            ([repr(value) for value in direction], repr(value))
            for direction, value in filippov.support_table(hull)
        ],
    )
