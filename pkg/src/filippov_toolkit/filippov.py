# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for the Filippov set-valued map of a piecewise right-hand side.

The set at (t, x) is the intersection over shrinking balls around x of the closed convex hull of
the essential range of the right-hand side on the ball. The fast path takes the hull of the
adjacent branch values directly; the generic path shrinks balls and compares successive hulls.
"""

import dataclasses
import logging
from typing import Sequence

import numpy as np

from filippov_toolkit import convex, essential
from filippov_toolkit.config import HULL_DEFAULTS
from filippov_toolkit.convex import ConvexApprox
from filippov_toolkit.errors import (
    ConvexificationError,
    DimensionMismatchError,
    ScheduleExhaustedError,
    UncoveredCellError,
)
from filippov_toolkit.essential import Verdict
from filippov_toolkit.expr import Expr, FloatArray, Var, ball_margin
from filippov_toolkit.piecewise import PiecewiseMap
from filippov_toolkit.region import (
    LEBESGUE,
    Constraint,
    MeasureModel,
    NegligibilityIdeal,
    Region,
)

logger = logging.getLogger(__name__)

RESOLUTION_FRACTION = 1.0 / 16.0
GENERIC_DEPTH_CAP = 64


@dataclasses.dataclass(frozen=True)
class FilippovMap:  # pylint: disable=too-many-instance-attributes
    """Set-valued map F(t, x) built from a piecewise right-hand side.

    Attributes:
        rhs: The right-hand side; its codomain dimension equals the state dimension.
        initial_radius: First ball radius, 0.1 times the domain diameter if None.
        shrink: Ratio between successive ball radii.
        max_steps: Number of ball radii of the schedule.
        tolerance: Hausdorff tolerance between successive hulls.
        ideal: The negligibility ideal.
        model: The measure model, Lebesgue on the domain if None.
        seed: Seed of the sampling used by the generic path.
    """

    rhs: PiecewiseMap
    initial_radius: float | None = None
    shrink: float = HULL_DEFAULTS.shrink
    max_steps: int = HULL_DEFAULTS.max_steps
    tolerance: float = HULL_DEFAULTS.tolerance
    ideal: NegligibilityIdeal = LEBESGUE
    model: MeasureModel | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the map and resolve the first radius.

        Raises:
            DimensionMismatchError: If the codomain and state dimensions differ.
            ValueError: If the schedule parameters are out of range.
        """
        if self.rhs.codomain_dim != self.rhs.domain.dim:
            raise DimensionMismatchError(
                f"Right-hand side maps dimension {self.rhs.domain.dim} "
                f"to {self.rhs.codomain_dim}"
            )
        if not 0.0 < self.shrink < 1.0:
            raise ValueError(f"Shrink factor must lie in (0, 1), got {self.shrink}")
        if self.max_steps < 2:
            raise ValueError(f"At least two radii are needed, got {self.max_steps}")
        if not self.tolerance > 0.0:
            raise ValueError(f"Hull tolerance must be positive, got {self.tolerance}")
        if self.initial_radius is None:
            object.__setattr__(
                self,
                "initial_radius",
                HULL_DEFAULTS.radius_fraction * self.rhs.domain.diameter,
            )
        elif not self.initial_radius > 0.0:
            raise ValueError(f"Initial radius must be positive, got {self.initial_radius}")

    @property
    def radii(self) -> tuple[float, ...]:
        """The strictly decreasing ball radii."""
        first = float(self.initial_radius or 0.0)
        return tuple(first * self.shrink**step for step in range(self.max_steps))

    @property
    def dim(self) -> int:
        """The state dimension."""
        return self.rhs.domain.dim

    def without_overrides(self) -> "FilippovMap":
        """Copy whose right-hand side has no overrides.

        Returns:
            The modified map.
        """
        return dataclasses.replace(self, rhs=self.rhs.without_overrides())


def cluster_values(
    rhs: PiecewiseMap, t: float, x: Sequence[float], tol: float | None = None
) -> tuple[tuple[float, ...], ...]:
    """Limit values of the branches adjacent to a point, overrides ignored.

    Args:
        rhs: The map.
        t: The time.
        x: The point.
        tol: Switching values within this bound count as on the surface; the map tolerance
            if None.

    Raises:
        UncoveredCellError: If no owned cell is adjacent to the point.

    Returns:
        The distinct values in lexicographic order.
    """
    cells = rhs.adjacent_cells(x, tol)
    if not cells:
        signs = rhs.switch_values(np.asarray([x], dtype=np.float64))[0]
        raise UncoveredCellError("".join("+" if value > 0 else "-" for value in signs))
    values = {tuple(float(v) for v in rhs.branch_value(cell, x, t)) for cell in cells}
    return tuple(sorted(values))


def fast_filippov_set(
    f: FilippovMap, t: float, x: Sequence[float], adjacency: float | None = None
) -> ConvexApprox:
    """Hull of the adjacent branch values.

    Args:
        f: The Filippov map.
        t: The time.
        x: The state.
        adjacency: Switching values within this bound count as on the surface; the map
            tolerance if None.

    Returns:
        The Filippov set.
    """
    values = cluster_values(f.rhs, t, x, tol=adjacency)
    return convex.convex_hull(np.asarray(values), dim=f.dim, tolerance=f.tolerance)


def _ball_region(f: FilippovMap, x: Sequence[float], radius: float) -> Region | None:
    """The open ball around x intersected with the domain.

    Args:
        f: The Filippov map.
        x: The center.
        radius: The radius.

    Returns:
        The region, or None when the ball misses the domain interior.
    """
    box = f.rhs.domain.around(x, radius)
    if box is None:
        return None
    margin = ball_margin([Var(index) for index in range(f.dim)], list(x), radius)
    return Region.where(box, (Constraint(Expr(margin, f.dim), ">"),))


def generic_filippov_set(f: FilippovMap, t: float, x: Sequence[float]) -> ConvexApprox:
    """Shrink balls around x until the hulls of the essential ranges settle.

    Args:
        f: The Filippov map.
        t: The time.
        x: The state.

    Raises:
        ConvexificationError: If a ball has an empty essential range.
        ScheduleExhaustedError: If the schedule ends before two hulls agree.

    Returns:
        The Filippov set.
    """
    f.rhs.adjacent_cells(x)  # raises for points outside the domain
    previous: ConvexApprox | None = None
    before: ConvexApprox | None = None
    for step, radius in enumerate(f.radii):
        ball = _ball_region(f, x, radius)
        if ball is None:
            raise ConvexificationError(f"Ball of radius {radius} around {list(x)} is empty")
        cover = essential.essential_range(
            f.rhs,
            ball,
            f.ideal,
            f.model,
            resolution=max(f.tolerance / 4.0, radius * RESOLUTION_FRACTION),
            seed=f.seed,
            depth_cap=GENERIC_DEPTH_CAP,
            hull_only=True,
            t=t,
        )
        points = cover.points()
        if points.shape[0] == 0:
            raise ConvexificationError(f"Essential range near {list(x)} is empty")
        hull = convex.convex_hull(points, dim=f.dim, tolerance=f.tolerance)
        if previous is not None:
            gap = convex.hausdorff(previous, hull)
            logger.debug("Radius %s (step %s): hull change %s.", radius, step, gap)
            if gap <= f.tolerance:
                return hull
        before, previous = previous, hull
    raise ScheduleExhaustedError(
        f"Hulls around {list(x)} did not settle within {f.max_steps} radii",
        last_hulls=(before, previous),
    )


def filippov_set(
    f: FilippovMap,
    t: float,
    x: Sequence[float],
    generic: bool = False,
    adjacency: float | None = None,
) -> ConvexApprox:
    """Compute the Filippov set F(t, x).

    Args:
        f: The Filippov map.
        t: The time.
        x: The state.
        generic: Use the shrinking ball computation instead of the adjacent branch values.
        adjacency: Adjacency bound of the fast path, the map tolerance if None.

    Returns:
        The closed convex set.
    """
    if generic:
        return generic_filippov_set(f, t, x)
    return fast_filippov_set(f, t, x, adjacency)


def singleton_check(
    f: FilippovMap, t: float, x: Sequence[float], tol: float = 1e-9
) -> tuple[bool, tuple[float, ...] | None]:
    """Whether the Filippov set collapses to a single value.

    Args:
        f: The Filippov map.
        t: The time.
        x: The state.
        tol: The largest diameter of a singleton.

    Returns:
        The flag and, for singletons, the value of the smallest adjacent cell.
    """
    model = f.model or MeasureModel(base=f.rhs.domain)
    if not model.charges_open_sets():
        logger.warning("The measure does not charge every open set, a collapse is not implied.")
    hull = filippov_set(f, t, x)
    if hull.diameter > tol:
        return False, None
    cell = f.rhs.adjacent_cells(x)[0]
    return True, tuple(float(v) for v in f.rhs.branch_value(cell, x, t))


def cluster_values_are_essential(
    f: FilippovMap, t: float, x: Sequence[float], radius: float | None = None
) -> bool:
    """Whether every adjacent limit value is a good value of the map near x.

    Args:
        f: The Filippov map.
        t: The time.
        x: The state.
        radius: Radius of the neighbourhood, the first scheduled radius if None.

    Returns:
        True if no limit value is bad on the ball.
    """
    ball = _ball_region(f, x, radius or f.radii[0])
    if ball is None:
        return False
    return all(
        essential.classify_value(f.rhs, ball, value, f.ideal, f.model, seed=f.seed, t=t).verdict
        == Verdict.GOOD
        for value in cluster_values(f.rhs, t, x)
    )


def support_table(hull: ConvexApprox) -> list[tuple[tuple[float, ...], float]]:
    """Direction and support value pairs over the fixed direction set.

    Args:
        hull: The convex set.

    Returns:
        One pair per direction.
    """
    directions = convex.direction_set(hull.dim)
    values: FloatArray = convex.support_profile(hull)
    return [
        (tuple(float(v) for v in direction), float(value))
        for direction, value in zip(directions, values)
    ]
