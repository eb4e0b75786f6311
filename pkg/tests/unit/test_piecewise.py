# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Unit tests for piecewise module."""

import numpy as np
import pytest

from filippov_toolkit.errors import (
    BranchDomainError,
    DimensionMismatchError,
    IrregularSurfaceError,
    OutsideDomainError,
    PiecewiseMapError,
    UncoveredCellError,
)
from filippov_toolkit.piecewise import CellId, Override
from filippov_toolkit.region import NullSet, PointList, SurfaceGenerator
from tests.unit.factories import PiecewiseMapFactory, QuadrantMapFactory, SmoothMapFactory


def test_cell_id_invalid():
    """
    arrange: given a key with a character other than a sign.
    act: when a cell id is built.
    assert: ValueError is raised.
    """
    with pytest.raises(ValueError):
        CellId("+0")


@pytest.mark.parametrize(
    "switch_texts, error",
    [
        pytest.param(("x1 - t",), PiecewiseMapError, id="time dependent switch"),
        pytest.param(("abs(x1)",), PiecewiseMapError, id="kinked switch"),
        pytest.param(("x1", "x1 - 1"), DimensionMismatchError, id="cell key too short"),
    ],
)
def test_piecewise_map_invalid_structure(switch_texts: tuple[str, ...], error: type[Exception]):
    """
    arrange: given invalid switching expressions.
    act: when the map is built.
    assert: the matching error is raised.
    """
    with pytest.raises(error):
        PiecewiseMapFactory(switch_texts=switch_texts)


def test_piecewise_map_wrong_branch_dimension():
    """
    arrange: given branches of different lengths.
    act: when the map is built.
    assert: DimensionMismatchError is raised.
    """
    with pytest.raises(DimensionMismatchError):
        PiecewiseMapFactory(branch_texts={"+": ("-1",), "-": ("1", "2")})


def test_override_wrong_dimension():
    """
    arrange: given the sign map.
    act: when an override with two components is added.
    assert: DimensionMismatchError is raised.
    """
    rhs = PiecewiseMapFactory()

    with pytest.raises(DimensionMismatchError):
        rhs.with_override(Override(NullSet((PointList(((0.0,),)),)), (1.0, 2.0)))


def test_default_switch_names():
    """
    arrange: given a map without switch names.
    act: when the names are read.
    assert: they default to s1..sk.
    """
    assert QuadrantMapFactory().switch_names == ("s1", "s2")


@pytest.mark.parametrize(
    "x, expected",
    [
        pytest.param((0.5, 0.5), ("++",), id="interior"),
        pytest.param((0.0, 0.5), ("++", "-+"), id="edge"),
        pytest.param((0.0, 0.0), ("++", "+-", "-+", "--"), id="corner"),
    ],
)
def test_adjacent_cells(x: tuple[float, ...], expected: tuple[str, ...]):
    """
    arrange: given the quadrant map.
    act: when the adjacent cells of points are listed.
    assert: every owned cell whose closure holds the point is listed in order.
    """
    cells = QuadrantMapFactory().adjacent_cells(x)

    assert tuple(cell.signs for cell in cells) == expected


def test_adjacent_cells_outside_domain():
    """
    arrange: given the sign map on [-2, 2].
    act: when adjacent cells of an outside point are listed.
    assert: OutsideDomainError is raised.
    """
    with pytest.raises(OutsideDomainError):
        PiecewiseMapFactory().adjacent_cells((3.0,))


def test_eval_raw():
    """
    arrange: given the sign map with an override at the origin.
    act: when the raw value is read on both sides and at the origin.
    assert: the branch values and the override value are returned.
    """
    rhs = PiecewiseMapFactory().with_override(
        Override(NullSet((PointList(((0.0,),)),)), (7.0,))
    )

    assert rhs.eval_raw((1.0,))[0] == -1.0
    assert rhs.eval_raw((-1.0,))[0] == 1.0
    assert rhs.eval_raw((0.0,))[0] == 7.0
    assert rhs.without_overrides().eval_raw((0.0,))[0] == -1.0


def test_eval_raw_uncovered():
    """
    arrange: given the sign map owning only the positive cell.
    act: when the raw value is read on the negative side.
    assert: UncoveredCellError is raised.
    """
    rhs = PiecewiseMapFactory(branch_texts={"+": ("-1",)})

    with pytest.raises(UncoveredCellError):
        rhs.eval_raw((-1.0,))


def test_eval_cells_many():
    """
    arrange: given a map owning only the positive cell.
    act: when values at points on both sides are computed.
    assert: the unowned cell gives NaN rows.
    """
    rhs = PiecewiseMapFactory(branch_texts={"+": ("2 * x1",)})

    values = rhs.eval_cells_many(np.array([[1.0], [-1.0]]))

    assert values[0, 0] == 2.0
    assert np.isnan(values[1, 0])


def test_is_continuous_at():
    """
    arrange: given the sign map and a map continuous across its surface.
    act: when continuity at the surface is tested.
    assert: only the continuous map is reported continuous.
    """
    continuous = PiecewiseMapFactory(branch_texts={"+": ("x1",), "-": ("-x1",)})

    assert continuous.is_continuous_at((0.0,))
    assert not PiecewiseMapFactory().is_continuous_at((0.0,))
    assert PiecewiseMapFactory().is_continuous_at((1.0,))


def test_constant_branch():
    """
    arrange: given the sign map and a smooth map.
    act: when constant branches are read.
    assert: constant values are returned and varying branches give None.
    """
    assert PiecewiseMapFactory().constant_branch(CellId("+")) == (-1.0,)
    assert SmoothMapFactory().constant_branch(CellId("")) is None


def test_surfaces_and_override_set():
    """
    arrange: given the quadrant map with two overrides.
    act: when the surfaces and the override set are read.
    assert: one surface generator per switch and the union of the override sets are returned.
    """
    point = PointList(((0.0, 0.0),))
    rhs = (
        QuadrantMapFactory()
        .with_override(Override(NullSet((point,)), (0.0, 0.0)))
        .with_override(Override(NullSet((point,)), (1.0, 1.0)))
    )

    assert rhs.surfaces.generators == tuple(SurfaceGenerator(s) for s in rhs.switches)
    assert rhs.override_set.generators == (point,)


def test_validate():
    """
    arrange: given the quadrant map.
    act: when it is validated.
    assert: no error is raised.
    """
    QuadrantMapFactory().validate(seed=1, samples=2000)


@pytest.mark.parametrize(
    "kwargs, error",
    [
        pytest.param(
            {"branch_texts": {"+": ("-1",)}}, UncoveredCellError, id="missing cell"
        ),
        pytest.param(
            {"branch_texts": {"+": ("log(x1 - 1)",), "-": ("1",)}},
            BranchDomainError,
            id="undefined branch",
        ),
        pytest.param({"switch_texts": ("x1^2",)}, IrregularSurfaceError, id="irregular switch"),
    ],
)
def test_validate_errors(kwargs: dict, error: type[Exception]):
    """
    arrange: given maps with coverage, definedness or regularity defects.
    act: when they are validated.
    assert: the matching error is raised.
    """
    with pytest.raises(error):
        PiecewiseMapFactory(**kwargs).validate(seed=0)


def test_branch_values_follow_time():
    """
    arrange: given a time dependent branch.
    act: when it is evaluated at two times.
    assert: the time argument is used.
    """
    rhs = PiecewiseMapFactory(branch_texts={"+": ("t",), "-": ("-t",)})
    cell = CellId("+")

    assert rhs.branch_value(cell, (1.0,), t=2.0)[0] == 2.0
    assert rhs.branch_value(cell, (1.0,), t=3.0)[0] == 3.0
    assert rhs.cell_region(cell).contains(np.array([[1.0], [-1.0]])).tolist() == [True, False]
