# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Unit tests for filippov module."""

import logging

import numpy as np
import pytest

from filippov_toolkit import expr, filippov
from filippov_toolkit.config import IdealKind
from filippov_toolkit.errors import (
    DimensionMismatchError,
    OutsideDomainError,
    UncoveredCellError,
)
from filippov_toolkit.filippov import FilippovMap
from filippov_toolkit.piecewise import Override
from filippov_toolkit.region import (
    Constraint,
    MeasureModel,
    NegligibilityIdeal,
    NullSet,
    PointList,
    Region,
)
from tests.unit.factories import (
    DryFrictionMapFactory,
    PiecewiseMapFactory,
    QuadrantMapFactory,
    SmoothMapFactory,
)

SQUARE = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]


def _spiked_sign_map():
    """The sign map with the value 7 forced at the origin.

    Returns:
        The map.
    """
    return PiecewiseMapFactory().with_override(
        Override(NullSet((PointList(((0.0,),)),)), (7.0,))
    )


def _positive_half_model(rhs) -> MeasureModel:
    """Lebesgue measure restricted to x1 > 0.

    Args:
        rhs: The map whose domain is the base box.

    Returns:
        The measure model.
    """
    support = Region.where(rhs.domain, (Constraint(expr.parse("x1", 1), ">"),))
    return MeasureModel(base=rhs.domain, support=support)


@pytest.mark.parametrize(
    "kwargs",
    [
        pytest.param({"shrink": 1.0}, id="shrink not below one"),
        pytest.param({"max_steps": 1}, id="single radius"),
        pytest.param({"tolerance": 0.0}, id="zero tolerance"),
        pytest.param({"initial_radius": -1.0}, id="negative radius"),
    ],
)
def test_filippov_map_invalid_parameters(kwargs: dict):
    """
    arrange: given schedule parameters out of range.
    act: when the Filippov map is built.
    assert: ValueError is raised.
    """
    with pytest.raises(ValueError):
        FilippovMap(PiecewiseMapFactory(), **kwargs)


def test_filippov_map_codomain_mismatch():
    """
    arrange: given a scalar state with a two dimensional right-hand side.
    act: when the Filippov map is built.
    assert: DimensionMismatchError is raised.
    """
    rhs = PiecewiseMapFactory(branch_texts={"+": ("-1", "0"), "-": ("1", "0")})

    with pytest.raises(DimensionMismatchError):
        FilippovMap(rhs)


def test_filippov_map_default_radii():
    """
    arrange: given the sign map on [-2, 2].
    act: when the radius schedule is read.
    assert: it starts at a tenth of the domain diameter and halves.
    """
    radii = FilippovMap(PiecewiseMapFactory()).radii

    assert len(radii) == 30
    assert radii[0] == pytest.approx(0.4)
    assert radii[1] == pytest.approx(0.2)


def test_filippov_map_without_overrides():
    """
    arrange: given a Filippov map over a map with an override.
    act: when the overrides are dropped.
    assert: the right-hand side has none left.
    """
    f = FilippovMap(_spiked_sign_map())

    assert f.without_overrides().rhs.overrides == ()
    assert len(f.rhs.overrides) == 1


@pytest.mark.parametrize(
    "x, expected",
    [
        pytest.param((0.0,), ((-1.0,), (1.0,)), id="on the surface"),
        pytest.param((1.0,), ((-1.0,),), id="positive side"),
        pytest.param((1e-12,), ((-1.0,), (1.0,)), id="within the surface tolerance"),
    ],
)
def test_cluster_values(x: tuple[float, ...], expected: tuple[tuple[float, ...], ...]):
    """
    arrange: given the sign map with a forced value at the origin.
    act: when the cluster values are read.
    assert: the adjacent branch values are returned and the forced value is ignored.
    """
    assert filippov.cluster_values(_spiked_sign_map(), 0.0, x) == expected


def test_cluster_values_uncovered():
    """
    arrange: given a map that only owns the positive cell.
    act: when the cluster values of a negative point are read.
    assert: UncoveredCellError is raised.
    """
    rhs = PiecewiseMapFactory(branch_texts={"+": ("-1",)})

    with pytest.raises(UncoveredCellError):
        filippov.cluster_values(rhs, 0.0, (-1.0,))


@pytest.mark.parametrize(
    "factory_, x, expected",
    [
        pytest.param(PiecewiseMapFactory, (0.0,), [[-1.0], [1.0]], id="sign"),
        pytest.param(DryFrictionMapFactory, (0.0,), [[-0.5], [1.5]], id="dry friction"),
        pytest.param(QuadrantMapFactory, (0.0, 0.0), SQUARE, id="quadrant corner"),
    ],
)
def test_fast_filippov_set(factory_, x: tuple[float, ...], expected: list[list[float]]):
    """
    arrange: given piecewise constant maps.
    act: when the Filippov set is computed from the adjacent branches.
    assert: the hull of the adjacent values is returned.
    """
    hull = filippov.filippov_set(FilippovMap(factory_()), 0.0, x)

    np.testing.assert_array_equal(hull.vertices, expected)


def test_fast_filippov_set_on_edge():
    """
    arrange: given the quadrant map.
    act: when the Filippov set on the x2 axis is computed.
    assert: the segment between the two adjacent values is returned.
    """
    hull = filippov.filippov_set(FilippovMap(QuadrantMapFactory()), 0.0, (0.0, 0.5))

    assert sorted(map(tuple, np.round(hull.vertices, 12))) == [(-1.0, -1.0), (1.0, -1.0)]
    assert hull.diameter == pytest.approx(2.0)


def test_fast_filippov_set_adjacency():
    """
    arrange: given the sign map and a point 1e-7 above the surface.
    act: when the Filippov set is computed with the map tolerance and with a wider adjacency.
    assert: only the wider adjacency puts the point on the surface.
    """
    f = FilippovMap(PiecewiseMapFactory())

    near = filippov.filippov_set(f, 0.0, (1e-7,))
    widened = filippov.filippov_set(f, 0.0, (1e-7,), adjacency=1e-6)

    np.testing.assert_array_equal(near.vertices, [[-1.0]])
    np.testing.assert_array_equal(widened.vertices, [[-1.0], [1.0]])


def test_generic_filippov_set_matches_fast_path():
    """
    arrange: given the sign map with a forced value and the quadrant map.
    act: when the Filippov sets are computed by shrinking balls.
    assert: the forced value is ignored and the hulls of the adjacent values are returned.
    """
    scalar = filippov.filippov_set(FilippovMap(_spiked_sign_map()), 0.0, (0.0,), generic=True)
    planar = filippov.filippov_set(FilippovMap(QuadrantMapFactory()), 0.0, (0.0, 0.0), True)

    np.testing.assert_allclose(scalar.vertices, [[-1.0], [1.0]])
    np.testing.assert_allclose(planar.vertices, SQUARE)


def test_generic_filippov_set_keeps_large_override():
    """
    arrange: given the sign map with a forced value and an ideal that does not list the origin.
    act: when the generic Filippov set is computed.
    assert: the forced value stretches the hull.
    """
    ideal = NegligibilityIdeal(kind=IdealKind.GENERATED, generators=())
    f = FilippovMap(_spiked_sign_map(), ideal=ideal)

    hull = filippov.generic_filippov_set(f, 0.0, (0.0,))

    np.testing.assert_allclose(hull.vertices, [[-1.0], [7.0]])


def test_generic_filippov_set_outside_domain():
    """
    arrange: given the sign map on [-2, 2].
    act: when the generic Filippov set of an outside point is computed.
    assert: OutsideDomainError is raised.
    """
    with pytest.raises(OutsideDomainError):
        filippov.generic_filippov_set(FilippovMap(PiecewiseMapFactory()), 0.0, (5.0,))


def test_singleton_check():
    """
    arrange: given a smooth map and the sign map.
    act: when the Filippov sets are checked for collapse.
    assert: the smooth map collapses to its value and the sign map does not on its surface.
    """
    smooth = filippov.singleton_check(FilippovMap(SmoothMapFactory()), 0.0, (0.5,))
    sign = filippov.singleton_check(FilippovMap(PiecewiseMapFactory()), 0.0, (0.0,))

    assert smooth == (True, (-0.5,))
    assert sign == (False, None)


def test_singleton_check_warns_for_partial_support(caplog: pytest.LogCaptureFixture):
    """
    arrange: given a measure that vanishes on half of the domain.
    act: when a collapse is checked.
    assert: a warning about the measure is logged.
    """
    rhs = PiecewiseMapFactory()
    f = FilippovMap(rhs, model=_positive_half_model(rhs))

    with caplog.at_level(logging.WARNING):
        filippov.singleton_check(f, 0.0, (1.0,))

    assert "does not charge every open set" in caplog.text


def test_cluster_values_are_essential():
    """
    arrange: given the sign map under Lebesgue measure and under a half supported measure.
    act: when the adjacent values at the origin are classified.
    assert: both are good only when the measure charges both sides.
    """
    rhs = PiecewiseMapFactory()

    assert filippov.cluster_values_are_essential(FilippovMap(rhs), 0.0, (0.0,))
    assert not filippov.cluster_values_are_essential(
        FilippovMap(rhs, model=_positive_half_model(rhs)), 0.0, (0.0,)
    )


def test_support_table():
    """
    arrange: given the Filippov set [-1, 1] of the sign map.
    act: when the support table is built.
    assert: one pair per direction is returned, each with support value 1.
    """
    hull = filippov.filippov_set(FilippovMap(PiecewiseMapFactory()), 0.0, (0.0,))

    table = filippov.support_table(hull)

    assert len(table) == 2
    assert table[0] == ((1.0,), 1.0)
    assert all(value == 1.0 for _, value in table)
