# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Unit tests for report module."""

import logging
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from filippov_toolkit import convex, expr, report, solver
from filippov_toolkit.errors import FileAccessError, ProblemFileError
from filippov_toolkit.essential import EssentialRange, PointClass, Verdict
from filippov_toolkit.region import DegenerateBox, PointList, SurfaceGenerator
from filippov_toolkit.solver import ResidualReport, Trajectory
from tests.unit.factories import IVProblemFactory


@pytest.fixture(scope="module", name="trajectory")
def trajectory_fixture() -> Trajectory:
    """The sliding trajectory of the sign map started at 1."""
    return solver.integrate(IVProblemFactory())


@pytest.mark.parametrize(
    "generator_, expected",
    [
        pytest.param(
            SurfaceGenerator(expr.parse("x1 - 1", 1)), {"expression": "(x1 - 1.0)"}, id="surface"
        ),
        pytest.param(
            DegenerateBox(lower=(0.0, 1.0), upper=(0.0, 2.0)),
            {"box": {"lower": [0.0, 1.0], "upper": [0.0, 2.0]}},
            id="degenerate box",
        ),
        pytest.param(PointList(((0.5,),)), {"points": [[0.5]]}, id="points"),
    ],
)
def test_generator_to_dict(generator_, expected: dict):
    """
    arrange: given null generators of each kind.
    act: when they are serialized.
    assert: the problem file notation is returned.
    """
    assert report.generator_to_dict(generator_) == expected


def test_range_to_dict():
    """
    arrange: given an exact range and a box cover.
    act: when they are serialized.
    assert: exact values and boxes with representatives are written.
    """
    exact = report.range_to_dict(EssentialRange(resolution=0.1, values=((-1.0,), (1.0,))))
    cover = report.range_to_dict(
        EssentialRange(
            resolution=0.1,
            boxes=(((0.0,), (0.1,)),),
            representatives=((0.05,),),
            low_confidence=True,
        )
    )

    assert exact["values"] == [[-1.0], [1.0]]
    assert "boxes" not in exact
    assert cover["boxes"] == [{"lower": [0.0], "upper": [0.1]}]
    assert cover["representatives"] == [[0.05]]
    assert cover["low_confidence"]


def test_classification_to_dict():
    """
    arrange: given a good value with an unbounded measure witness.
    act: when it is serialized.
    assert: the verdict is written by name and the witness is kept.
    """
    document = report.classification_to_dict(
        PointClass(value=(7.0,), verdict=Verdict.GOOD, radius=0.5, measure_lower_bound=math.inf)
    )

    assert document["verdict"] == "good"
    assert document["value"] == [7.0]
    assert math.isinf(document["measure_lower_bound"])


def test_hull_to_dict():
    """
    arrange: given an exact segment and a four dimensional hull.
    act: when they are serialized.
    assert: the segment keeps its vertices and the other hull becomes a support table.
    """
    segment = report.hull_to_dict(convex.convex_hull([[-1.0], [1.0]]))
    table = report.hull_to_dict(convex.convex_hull(np.eye(4)))

    assert sorted(segment["vertices"]) == [[-1.0], [1.0]]
    assert segment["dim"] == 1
    assert "vertices" not in table
    assert len(table["support"]) == len(convex.direction_set(4))
    assert all(len(item["direction"]) == 4 for item in table["support"])


def test_residual_to_dict():
    """
    arrange: given a residual report with one violation above the tolerance.
    act: when it is serialized.
    assert: the failure and the per sample violations are written.
    """
    document = report.residual_to_dict(
        ResidualReport(times=(0.5, 1.5), violations=(0.0, 0.25), tolerance=0.1)
    )

    assert not document["passed"]
    assert document["max_violation"] == 0.25
    assert document["samples"] == [{"t": 0.5, "violation": 0.0}, {"t": 1.5, "violation": 0.25}]


def test_trajectory_round_trip(trajectory: Trajectory):
    """
    arrange: given a trajectory with a sliding event.
    act: when it is written to YAML text and read back.
    assert: nodes, events, stop reason and dense output are restored exactly.
    """
    document = yaml.safe_load(yaml.safe_dump(report.trajectory_to_dict(trajectory)))

    restored = report.trajectory_from_dict(document)

    assert restored.times == trajectory.times
    assert [node.x for node in restored.nodes] == [node.x for node in trajectory.nodes]
    assert [node.mode for node in restored.nodes] == [node.mode for node in trajectory.nodes]
    assert restored.events == trajectory.events
    assert restored.stop == trajectory.stop
    np.testing.assert_array_equal(restored.state(0.5), trajectory.state(0.5))
    np.testing.assert_array_equal(restored.derivative(1.5), trajectory.derivative(1.5))


@pytest.mark.parametrize(
    "document",
    [
        pytest.param({"nodes": 1, "segments": []}, id="nodes not a list"),
        pytest.param({"nodes": []}, id="segments missing"),
        pytest.param({"nodes": [], "segments": [], "stop": "later"}, id="unknown stop reason"),
    ],
)
def test_trajectory_from_dict_malformed(document: dict):
    """
    arrange: given malformed trajectory documents.
    act: when they are read.
    assert: ProblemFileError names the trajectory.
    """
    with pytest.raises(ProblemFileError) as exc:
        report.trajectory_from_dict(document)

    assert exc.value.field == "trajectory"


@pytest.mark.parametrize(
    "field, index",
    [
        pytest.param("nodes", 1, id="repeated node time"),
        pytest.param("segments", 0, id="segment ending before it starts"),
    ],
)
def test_trajectory_from_dict_times_not_increasing(
    trajectory: Trajectory, field: str, index: int
):
    """
    arrange: given a serialized trajectory whose times go backwards.
    act: when it is read.
    assert: ProblemFileError names the trajectory.
    """
    document = report.trajectory_to_dict(trajectory)
    if field == "nodes":
        document["nodes"][index]["t"] = document["nodes"][index - 1]["t"]
    else:
        document["segments"][index]["t1"] = document["segments"][index]["t0"] - 0.5

    with pytest.raises(ProblemFileError) as exc:
        report.trajectory_from_dict(document)

    assert exc.value.field == "trajectory"


@pytest.mark.parametrize(
    "wrap",
    [
        pytest.param(True, id="solve report"),
        pytest.param(False, id="bare trajectory"),
    ],
)
def test_load_trajectory(trajectory: Trajectory, tmp_path: Path, wrap: bool):
    """
    arrange: given a trajectory written as a solve report and as a bare document.
    act: when the files are loaded.
    assert: the same trajectory is read from both.
    """
    document = report.trajectory_to_dict(trajectory)
    if wrap:
        document = {"command": "solve", "results": {"trajectory": document}}
    path = tmp_path / "trajectory.yaml"
    path.write_text(yaml.safe_dump(document), encoding="utf-8")

    loaded = report.load_trajectory(path)

    assert loaded.times == trajectory.times
    assert loaded.final.x == trajectory.final.x


@pytest.mark.parametrize(
    "text",
    [
        pytest.param("nodes: [", id="invalid yaml"),
        pytest.param("- 1\n", id="not a mapping"),
        pytest.param("results: {check: 1}\n", id="report without trajectory"),
    ],
)
def test_load_trajectory_malformed(tmp_path: Path, text: str):
    """
    arrange: given files that hold no trajectory.
    act: when they are loaded.
    assert: ProblemFileError is raised.
    """
    path = tmp_path / "trajectory.yaml"
    path.write_text(text, encoding="utf-8")

    with pytest.raises(ProblemFileError):
        report.load_trajectory(path)


def test_load_trajectory_missing(tmp_path: Path):
    """
    arrange: given a path without a file.
    act: when it is loaded.
    assert: FileAccessError is raised.
    """
    with pytest.raises(FileAccessError):
        report.load_trajectory(tmp_path / "missing.yaml")


def test_trajectory_table(trajectory: Trajectory):
    """
    arrange: given the sliding trajectory of the sign map.
    act: when the node table is rendered.
    assert: one quoted mode label per node follows the time and the state.
    """
    lines = report.trajectory_table(trajectory).splitlines()

    assert lines[0] == "t,x1,mode"
    assert len(lines) == len(trajectory.nodes) + 1
    assert lines[1] == '0.0,1.0,"smooth(+)"'
    assert lines[-1].endswith('"stopped(horizon)"')


def test_hull_table():
    """
    arrange: given the square [-1, 1]^2.
    act: when the support table is rendered.
    assert: every direction has a support value between 1 and the square root of 2.
    """
    square = convex.convex_hull([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])

    lines = report.hull_table(square).splitlines()

    assert lines[0] == "d1,d2,support"
    assert len(lines) == len(convex.direction_set(2)) + 1
    values = [float(line.rsplit(",", 1)[1]) for line in lines[1:]]
    assert all(1.0 - 1e-12 <= value <= math.sqrt(2.0) + 1e-12 for value in values)


def test_collect_warnings():
    """
    arrange: given repeated and distinct warnings logged inside the block.
    act: when the block exits.
    assert: each warning is listed once in order and lower levels are left out.
    """
    package_logger = logging.getLogger("filippov_toolkit.test")

    with report.collect_warnings() as warnings:
        package_logger.warning("Cover reached the depth cap.")
        package_logger.info("Cover refined.")
        package_logger.warning("Measure does not charge every open set.")
        package_logger.warning("Cover reached the depth cap.")

    assert warnings == [
        "Cover reached the depth cap.",
        "Measure does not charge every open set.",
    ]


def test_run_report():
    """
    arrange: given a run report.
    act: when the full document and the payload are dumped.
    assert: the document holds every field and the payload only the results.
    """
    run_report = report.RunReport(
        command="check sign.yaml",
        config_hash="a" * 64,
        results={"switches": ["s"]},
        warnings=["Cover reached the depth cap."],
        wall_time=0.25,
    )

    document = yaml.safe_load(run_report.dump())

    assert document == {
        "command": "check sign.yaml",
        "config_hash": "a" * 64,
        "results": {"switches": ["s"]},
        "warnings": ["Cover reached the depth cap."],
        "wall_time": 0.25,
    }
    assert yaml.safe_load(run_report.payload()) == {"switches": ["s"]}
