# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Unit tests for convex module."""

import numpy as np
import pytest

from filippov_toolkit import convex
from filippov_toolkit.errors import ConvexificationError, EmptyHullInputError


@pytest.mark.parametrize(
    "dim, expected",
    [
        pytest.param(1, 2, id="line"),
        pytest.param(2, 104, id="plane"),
        pytest.param(5, 110, id="five dimensions"),
    ],
)
def test_direction_set(dim: int, expected: int):
    """
    arrange: given dimensions.
    act: when the direction set is built.
    assert: it holds the axis directions plus the low discrepancy ones, all of unit length.
    """
    directions = convex.direction_set(dim)

    assert directions.shape == (expected, dim)
    np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)
    np.testing.assert_array_equal(directions[:dim], np.eye(dim))


def test_direction_set_is_deterministic():
    """
    arrange: given two requests for the same direction set.
    act: when the sets are compared.
    assert: they are identical.
    """
    np.testing.assert_array_equal(convex.direction_set(3), convex.direction_set(3))


def test_convex_hull_empty():
    """
    arrange: given no points.
    act: when the hull is computed.
    assert: EmptyHullInputError is raised.
    """
    with pytest.raises(EmptyHullInputError):
        convex.convex_hull(np.empty((0, 2)))


def test_convex_hull_not_finite():
    """
    arrange: given a point with an infinite coordinate.
    act: when the hull is computed.
    assert: ConvexificationError is raised.
    """
    with pytest.raises(ConvexificationError):
        convex.convex_hull([[0.0, np.inf]])


def test_convex_hull_interval():
    """
    arrange: given scalar values.
    act: when the hull is computed.
    assert: the hull is the interval between the extremes.
    """
    hull = convex.convex_hull([[1.0], [-1.0], [0.25]], dim=1)

    np.testing.assert_array_equal(hull.vertices, [[-1.0], [1.0]])
    assert convex.support(hull, [1.0]) == 1.0
    assert convex.support(hull, [-3.0]) == 1.0
    assert convex.violation(hull, [3.0]) == 2.0
    assert convex.violation(hull, [0.0]) == 0.0
    assert hull.diameter == 2.0


def test_convex_hull_square_orders_vertices():
    """
    arrange: given the corners of the unit square, an interior point and a duplicate.
    act: when the hull is computed.
    assert: the corners are returned counterclockwise from the smallest one.
    """
    points = [[1.0, 1.0], [0.5, 0.5], [0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]

    hull = convex.convex_hull(points)

    assert hull.is_exact
    np.testing.assert_array_equal(hull.vertices, [[0, 0], [1, 0], [1, 1], [0, 1]])
    assert convex.membership(hull, [0.5, 0.5], tol=0.0)
    assert not convex.membership(hull, [1.5, 0.5], tol=0.1)
    assert convex.violation(hull, [1.5, 0.5]) == pytest.approx(0.5)


def test_convex_hull_collinear_points():
    """
    arrange: given points on a segment in the plane.
    act: when the hull is computed.
    assert: the hull is the segment and points off the segment violate it.
    """
    hull = convex.convex_hull([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5], [2.0, 2.0]])

    assert sorted(map(tuple, np.round(hull.vertices, 12))) == [(0.0, 0.0), (2.0, 2.0)]
    assert convex.membership(hull, [1.5, 1.5], tol=1e-9)
    assert convex.violation(hull, [1.0, 0.0]) == pytest.approx(np.sqrt(0.5))


def test_convex_hull_single_point():
    """
    arrange: given one repeated point.
    act: when the hull is computed.
    assert: the hull is the point with a zero diameter.
    """
    hull = convex.convex_hull([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])

    np.testing.assert_array_equal(hull.vertices, [[1.0, 2.0, 3.0]])
    assert hull.diameter == 0.0
    assert convex.violation(hull, [1.0, 2.5, 3.0]) == pytest.approx(0.5)


def test_convex_hull_cube():
    """
    arrange: given the corners of the unit cube and its center.
    act: when the hull is computed.
    assert: the eight corners are the vertices.
    """
    corners = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])

    hull = convex.convex_hull(np.concatenate([corners, [[0.5, 0.5, 0.5]]]))

    assert hull.vertices.shape == (8, 3)
    assert convex.membership(hull, [0.2, 0.9, 0.5], tol=0.0)
    assert convex.violation(hull, [0.5, 0.5, 2.0]) == pytest.approx(1.0)


def test_convex_hull_planar_in_space():
    """
    arrange: given a square lying in the plane z = 1.
    act: when the hull is computed.
    assert: the square is kept in its plane and points off the plane violate it.
    """
    square = [[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]]

    hull = convex.convex_hull(square)

    assert hull.vertices.shape == (4, 3)
    assert convex.membership(hull, [0.5, 0.5, 1.0], tol=1e-9)
    assert convex.violation(hull, [0.5, 0.5, 1.25]) == pytest.approx(0.25)


def test_convex_hull_high_dimension_support_table():
    """
    arrange: given the unit vectors of four dimensions.
    act: when the hull is computed.
    assert: a support table over the direction set is returned.
    """
    hull = convex.convex_hull(np.eye(4), tolerance=1e-3)

    assert not hull.is_exact
    assert hull.support_values.shape == (convex.direction_set(4).shape[0],)
    assert convex.support(hull, [1.0, 0.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert convex.membership(hull, [0.25, 0.25, 0.25, 0.25], tol=0.0)
    assert convex.violation(hull, [2.0, 0.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert hull.tolerance == 1e-3


def test_hausdorff():
    """
    arrange: given the intervals [-1, 1] and [-1, 2].
    act: when the support deviation is computed.
    assert: it equals the shift of the right end.
    """
    first = convex.convex_hull([[-1.0], [1.0]])
    second = convex.convex_hull([[-1.0], [2.0]])

    assert convex.hausdorff(first, second) == 1.0
    assert convex.hausdorff(first, first) == 0.0


def test_support_profile_matches_support():
    """
    arrange: given a triangle.
    act: when the support profile is computed.
    assert: each entry equals the support value of its direction.
    """
    hull = convex.convex_hull([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]])

    profile = convex.support_profile(hull)

    for direction, value in zip(convex.direction_set(2), profile):
        assert value == pytest.approx(convex.support(hull, direction))
