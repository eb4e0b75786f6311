# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for closed convex hulls, support functions and membership tests."""

import dataclasses
import functools
import logging
from typing import Sequence

import numpy as np
from scipy import spatial, stats
from scipy.stats import qmc

from filippov_toolkit.config import HULL_DEFAULTS
from filippov_toolkit.errors import ConvexificationError, EmptyHullInputError
from filippov_toolkit.expr import FloatArray

logger = logging.getLogger(__name__)

EXACT_MAX_DIM = 3
RANK_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True, eq=False)
class ConvexApprox:
    """Closed convex set as exact vertices or as a table of support values.

    Attributes:
        dim: The ambient dimension.
        vertices: Minimal vertex list (counterclockwise in 2D), None for a support table.
        normals: Outward unit normals of the exact halfspace description.
        offsets: Halfspace offsets, the set is {v : normals @ v <= offsets}.
        directions: Sampled unit directions of a support table.
        support_values: Support values over the sampled directions.
        tolerance: The Hausdorff tolerance the set was computed for.
    """

    dim: int
    vertices: FloatArray | None = None
    normals: FloatArray | None = None
    offsets: FloatArray | None = None
    directions: FloatArray | None = None
    support_values: FloatArray | None = None
    tolerance: float = HULL_DEFAULTS.tolerance

    @property
    def is_exact(self) -> bool:
        """Whether the set is given by vertices."""
        return self.vertices is not None

    @property
    def diameter(self) -> float:
        """The largest distance between two points of the set."""
        if self.vertices is not None:
            gaps = self.vertices[:, None, :] - self.vertices[None, :, :]
            return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", gaps, gaps))))
        return max(
            support(self, direction) + support(self, -direction)
            for direction in direction_set(self.dim)
        )


@functools.lru_cache(maxsize=16)
def _direction_table(dim: int, count: int) -> FloatArray:
    """Cached direction set.

    Args:
        dim: The dimension.
        count: Number of low discrepancy directions.

    Returns:
        Unit directions of shape (2 dim + count, dim).
    """
    axes = np.concatenate([np.eye(dim), -np.eye(dim)])
    if dim == 1:
        return axes
    halton = qmc.Halton(d=dim, scramble=False).random(count + 1)[1:]
    gaussian = stats.norm.ppf(halton)
    unit = gaussian / np.linalg.norm(gaussian, axis=1, keepdims=True)
    table = np.concatenate([axes, unit])
    table.setflags(write=False)
    return table


def direction_set(dim: int, count: int = HULL_DEFAULTS.directions) -> FloatArray:
    """Fixed deterministic unit directions: the 2 dim axis directions and low discrepancy ones.

    Args:
        dim: The dimension.
        count: Number of low discrepancy directions.

    Returns:
        Unit directions of shape (K, dim).
    """
    return _direction_table(dim, count)


def _cross(origin: FloatArray, a: FloatArray, b: FloatArray) -> float:
    """Z component of (a - origin) x (b - origin).

    Args:
        origin: The common origin.
        a: The first point.
        b: The second point.

    Returns:
        The cross product.
    """
    first, second = a - origin, b - origin
    return float(first[0] * second[1] - first[1] * second[0])


def _monotone_chain(points: FloatArray) -> FloatArray:
    """Planar hull by the monotone chain algorithm.

    Args:
        points: Distinct points of shape (K, 2), lexicographically sorted.

    Returns:
        Hull vertices in counterclockwise order, starting at the lexicographically smallest.
    """
    if points.shape[0] <= 2:
        return points
    scale = float(np.max(np.ptp(points, axis=0))) ** 2
    eps = RANK_TOLERANCE * max(scale, 1.0)
    lower: list[FloatArray] = []
    for point in points:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], point) <= eps:
            lower.pop()
        lower.append(point)
    upper: list[FloatArray] = []
    for point in points[::-1]:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], point) <= eps:
            upper.pop()
        upper.append(point)
    return np.asarray(lower[:-1] + upper[:-1])


def _box_halfspaces(point: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Halfspaces of a single point.

    Args:
        point: The point.

    Returns:
        Normals and offsets.
    """
    dim = point.shape[0]
    normals = np.concatenate([np.eye(dim), -np.eye(dim)])
    return normals, normals @ point


def _full_hull(points: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Hull of full dimensional points in dimension 1 to 3.

    Args:
        points: Distinct points of shape (K, d) spanning d dimensions.

    Raises:
        ConvexificationError: If the facet computation fails.

    Returns:
        Vertices, normals and offsets.
    """
    dim = points.shape[1]
    if dim == 1:
        vertices = np.array([[points.min()], [points.max()]])
        normals = np.array([[1.0], [-1.0]])
        return vertices, normals, np.array([vertices[1, 0], -vertices[0, 0]])
    if dim == 2:
        vertices = _monotone_chain(points)
        edges = np.roll(vertices, -1, axis=0) - vertices
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return vertices, normals, np.einsum("ij,ij->i", normals, vertices)
    try:
        hull = spatial.ConvexHull(points)
    except spatial.QhullError as exc:
        logger.exception("Failed to compute the facets of %s points.", points.shape[0])
        raise ConvexificationError("Failed to compute the convex hull") from exc
    return points[np.sort(hull.vertices)], hull.equations[:, :-1], -hull.equations[:, -1]


def _exact_hull(points: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Hull in dimension at most 3, degenerate inputs kept in their affine span.

    Args:
        points: Distinct points of shape (K, n).

    Returns:
        Vertices, normals and offsets.
    """
    dim = points.shape[1]
    if points.shape[0] == 1:
        return (points, *_box_halfspaces(points[0]))
    center = points.mean(axis=0)
    _, singular, basis = np.linalg.svd(points - center, full_matrices=True)
    scale = max(float(singular[0]), 1.0)
    rank = int(np.sum(singular > RANK_TOLERANCE * scale))
    if rank == dim:
        return _full_hull(points)
    span, complement = basis[:rank], basis[rank:]
    if rank == 0:
        return (points[:1], *_box_halfspaces(points[0]))
    local = (points - center) @ span.T
    order = np.lexsort(local.T[::-1])
    local_vertices, local_normals, local_offsets = _full_hull(local[order])
    vertices = center + local_vertices @ span
    normals = np.concatenate([local_normals @ span, complement, -complement])
    offsets = np.concatenate(
        [local_offsets + local_normals @ span @ center, complement @ center, -complement @ center]
    )
    return vertices, normals, offsets


def convex_hull(
    points: Sequence[Sequence[float]] | FloatArray,
    dim: int | None = None,
    tolerance: float = HULL_DEFAULTS.tolerance,
) -> ConvexApprox:
    """Closed convex hull of finitely many points.

    Args:
        points: The points.
        dim: The dimension, inferred from the points if None.
        tolerance: The Hausdorff tolerance recorded in the result.

    Raises:
        EmptyHullInputError: If no point is given.
        ConvexificationError: If a coordinate is not finite.

    Returns:
        Exact vertices for dimension up to 3, a support table above.
    """
    array = np.asarray(points, dtype=np.float64)
    if array.size == 0:
        raise EmptyHullInputError("Cannot compute the hull of no points")
    array = array.reshape(array.shape[0], -1) if dim is None else array.reshape(-1, dim)
    if not np.all(np.isfinite(array)):
        raise ConvexificationError("Hull input has non finite coordinates")
    array = np.unique(array, axis=0)
    size = array.shape[1]
    if size <= EXACT_MAX_DIM:
        vertices, normals, offsets = _exact_hull(array)
        return ConvexApprox(
            dim=size, vertices=vertices, normals=normals, offsets=offsets, tolerance=tolerance
        )
    directions = direction_set(size)
    return ConvexApprox(
        dim=size,
        directions=directions,
        support_values=np.max(array @ directions.T, axis=0),
        tolerance=tolerance,
    )


def _table(hull: ConvexApprox) -> tuple[FloatArray, FloatArray]:
    """Sampled directions and support values of a support table.

    Args:
        hull: The convex set.

    Raises:
        ConvexificationError: If the set carries neither vertices nor a support table.

    Returns:
        The directions and the support values.
    """
    if hull.directions is None or hull.support_values is None:
        raise ConvexificationError("Convex set has neither vertices nor support values")
    return hull.directions, hull.support_values


def support(hull: ConvexApprox, direction: Sequence[float] | FloatArray) -> float:
    """Support function value.

    Args:
        hull: The convex set.
        direction: The direction, normalized internally.

    Returns:
        The support value; for support tables the largest value of the three nearest samples.
    """
    unit = np.asarray(direction, dtype=np.float64)
    unit = unit / np.linalg.norm(unit)
    if hull.vertices is not None:
        return float(np.max(hull.vertices @ unit))
    directions, values = _table(hull)
    nearest = np.argsort(-(directions @ unit), kind="stable")[:3]
    return float(np.max(values[nearest]))


def violation(hull: ConvexApprox, v: Sequence[float] | FloatArray) -> float:
    """Largest support violation of a vector.

    Args:
        hull: The convex set.
        v: The vector.

    Returns:
        max over test directions of <v, d> - h(d), clamped at 0.
    """
    vector = np.asarray(v, dtype=np.float64)
    if hull.normals is not None and hull.offsets is not None:
        excess = hull.normals @ vector - hull.offsets
    else:
        directions, values = _table(hull)
        excess = directions @ vector - values
    return max(float(np.max(excess)), 0.0)


def membership(hull: ConvexApprox, v: Sequence[float] | FloatArray, tol: float) -> bool:
    """Whether a vector lies in the set up to a tolerance.

    Args:
        hull: The convex set.
        v: The vector.
        tol: The tolerance.

    Returns:
        True if <v, d> <= h(d) + tol for every test direction.
    """
    return violation(hull, v) <= tol


def support_profile(hull: ConvexApprox) -> FloatArray:
    """Support values over the fixed direction set.

    Args:
        hull: The convex set.

    Returns:
        One value per direction of direction_set(hull.dim).
    """
    directions = direction_set(hull.dim)
    if hull.vertices is not None:
        return np.max(hull.vertices @ directions.T, axis=0)
    return np.asarray([support(hull, direction) for direction in directions])


def hausdorff(a: ConvexApprox, b: ConvexApprox) -> float:
    """Symmetric support function deviation over the fixed direction set.

    Args:
        a: The first set.
        b: The second set.

    Returns:
        max over directions of |h_a(d) - h_b(d)|.
    """
    return float(np.max(np.abs(support_profile(a) - support_profile(b))))
