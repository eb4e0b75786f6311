# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for piecewise continuous maps with switching surfaces and null overrides."""

import dataclasses
import itertools
import logging
from typing import Mapping, Sequence

import numpy as np

from filippov_toolkit import region, sampling
from filippov_toolkit.config import SURFACE_DEFAULTS
from filippov_toolkit.errors import (
    BranchDomainError,
    DimensionMismatchError,
    OutsideDomainError,
    PiecewiseMapError,
    UncoveredCellError,
)
from filippov_toolkit.expr import EvalPoint, Expr, FloatArray
from filippov_toolkit.region import Constraint, DomainBox, NullSet, SurfaceGenerator

logger = logging.getLogger(__name__)

SIGNS = "+-"
COVERAGE_STREAM = 2**62 + 2


@dataclasses.dataclass(frozen=True, order=True)
class CellId:
    """Sign vector of a cell, one "+" or "-" per switching expression.

    Attributes:
        signs: The sign characters.
    """

    signs: str

    def __post_init__(self) -> None:
        """Validate the sign characters.

        Raises:
            ValueError: If a character is not a sign.
        """
        if any(char not in SIGNS for char in self.signs):
            raise ValueError(f"Cell key must consist of '+' and '-', got {self.signs!r}")

    def __str__(self) -> str:
        """The sign string.

        Returns:
            The sign characters.
        """
        return self.signs

    def constraints(self, switches: Sequence[Expr]) -> tuple[Constraint, ...]:
        """Strict constraints describing the open cell.

        Args:
            switches: The switching expressions.

        Returns:
            One constraint per switching expression.
        """
        return tuple(
            Constraint(expr=switch, sign=">" if sign == "+" else "<")
            for switch, sign in zip(switches, self.signs)
        )


@dataclasses.dataclass(frozen=True)
class Override:
    """Constant value assigned on a null set.

    Attributes:
        where: The null set.
        value: The assigned value.
    """

    where: NullSet
    value: tuple[float, ...]


@dataclasses.dataclass(frozen=True)
class PiecewiseMap:  # pylint: disable=too-many-instance-attributes
    """Map that is continuous on every sign cell of its switching expressions.

    Attributes:
        domain: The domain box.
        codomain_dim: The value dimension.
        switches: The switching expressions.
        branches: Branch expression vectors keyed by owning cell.
        overrides: Values assigned on null sets, taking precedence over branches.
        switch_names: Display names of the switching expressions.
        tolerance: Switching values within this bound are treated as on the surface.
    """

    domain: DomainBox
    codomain_dim: int
    switches: tuple[Expr, ...]
    branches: Mapping[CellId, tuple[Expr, ...]]
    overrides: tuple[Override, ...] = ()
    switch_names: tuple[str, ...] = ()
    tolerance: float = SURFACE_DEFAULTS.adjacency_tolerance

    def __post_init__(self) -> None:
        """Validate the structure of the map.

        Raises:
            DimensionMismatchError: If expressions or values have inconsistent dimensions.
            PiecewiseMapError: If a switching expression uses t, abs, min or max.
        """
        dim = self.domain.dim
        for switch in self.switches:
            if switch.dim != dim:
                raise DimensionMismatchError(f"Switch {switch.text} has dimension {switch.dim}")
            if switch.depends_on_time:
                raise PiecewiseMapError(f"Switch {switch.text} must not depend on t")
            if switch.has_kinks:
                raise PiecewiseMapError(f"Switch {switch.text} must not use abs, min or max")
        for cell, branch in self.branches.items():
            if len(cell.signs) != len(self.switches):
                raise DimensionMismatchError(
                    f"Cell {cell} has {len(cell.signs)} signs for {len(self.switches)} switches"
                )
            if len(branch) != self.codomain_dim or any(e.dim != dim for e in branch):
                raise DimensionMismatchError(f"Branch of cell {cell} has the wrong dimension")
        for override in self.overrides:
            if len(override.value) != self.codomain_dim:
                raise DimensionMismatchError(f"Override value {override.value} has wrong length")
        if not self.switch_names:
            object.__setattr__(
                self, "switch_names", tuple(f"s{i + 1}" for i in range(len(self.switches)))
            )

    @property
    def owned_cells(self) -> tuple[CellId, ...]:
        """Owned cells in lexicographic order."""
        return tuple(sorted(self.branches))

    @property
    def surfaces(self) -> NullSet:
        """The switching surfaces as null generators."""
        return NullSet(generators=tuple(SurfaceGenerator(expr=switch) for switch in self.switches))

    @property
    def override_set(self) -> NullSet:
        """Union of all override sets."""
        result = NullSet()
        for override in self.overrides:
            result = result.union(override.where)
        return result

    def with_override(self, override: Override) -> "PiecewiseMap":
        """Copy with an additional override.

        Args:
            override: The override to add.

        Returns:
            The modified map.
        """
        return dataclasses.replace(self, overrides=(*self.overrides, override))

    def without_overrides(self) -> "PiecewiseMap":
        """Copy with all overrides dropped.

        Returns:
            The modified map.
        """
        return dataclasses.replace(self, overrides=())

    def cell_region(self, cell: CellId) -> region.Region:
        """The open cell as a region of the domain.

        Args:
            cell: The cell.

        Returns:
            The region.
        """
        return region.Region.where(self.domain, cell.constraints(self.switches))

    def switch_values(self, xs: FloatArray) -> FloatArray:
        """Switching values at points.

        Args:
            xs: Points of shape (N, m).

        Returns:
            Values of shape (N, k).
        """
        xs = np.atleast_2d(xs)
        if not self.switches:
            return np.zeros((xs.shape[0], 0))
        return np.stack([switch.evaluate_many(xs) for switch in self.switches], axis=1)

    def branch_values(self, cell: CellId, xs: FloatArray, t: float = 0.0) -> FloatArray:
        """Branch values of a cell at points.

        Args:
            cell: The owned cell.
            xs: Points of shape (N, m).
            t: The time.

        Returns:
            Values of shape (N, n).
        """
        return np.stack([e.evaluate_many(xs, t) for e in self.branches[cell]], axis=1)

    def branch_value(self, cell: CellId, x: Sequence[float], t: float = 0.0) -> FloatArray:
        """Branch value of a cell at one point.

        Args:
            cell: The owned cell.
            x: The point.
            t: The time.

        Returns:
            The value vector.
        """
        return self.branch_values(cell, np.asarray([x], dtype=np.float64), t)[0]

    def constant_branch(self, cell: CellId) -> tuple[float, ...] | None:
        """Value of a branch that references no variable.

        Args:
            cell: The owned cell.

        Returns:
            The constant value vector, or None when the branch varies.
        """
        branch = self.branches[cell]
        if not all(e.is_constant for e in branch):
            return None
        return tuple(e.evaluate(EvalPoint(x=(0.0,) * self.domain.dim)) for e in branch)

    def _check_inside(self, x: Sequence[float]) -> FloatArray:
        """Validate a query point.

        Args:
            x: The point.

        Raises:
            DimensionMismatchError: If the point has the wrong dimension.
            OutsideDomainError: If the point lies outside the domain.

        Returns:
            The point as an array.
        """
        point = np.asarray(x, dtype=np.float64)
        if point.shape != (self.domain.dim,):
            raise DimensionMismatchError(f"Expected a point of dimension {self.domain.dim}")
        if not self.domain.contains(point[None, :])[0]:
            raise OutsideDomainError(f"Point {point.tolist()} lies outside of {self.domain}")
        return point

    def adjacent_cells(self, x: Sequence[float], tol: float | None = None) -> tuple[CellId, ...]:
        """Owned cells whose closure contains a point.

        Args:
            x: The point.
            tol: Switching values within this bound are wildcards; the map tolerance if None.

        Returns:
            The adjacent owned cells in lexicographic order.
        """
        point = self._check_inside(x)
        tol = self.tolerance if tol is None else tol
        values = self.switch_values(point[None, :])[0]
        choices = [
            SIGNS if abs(value) <= tol else ("+" if value > 0 else "-") for value in values
        ]
        return tuple(
            cell
            for cell in (CellId("".join(signs)) for signs in itertools.product(*choices))
            if cell in self.branches
        )

    def override_at(self, x: Sequence[float]) -> Override | None:
        """The first override whose set contains a point.

        Args:
            x: The point.

        Returns:
            The override, or None.
        """
        point = np.asarray(x, dtype=np.float64)[None, :]
        for override in self.overrides:
            if override.where.contains(point)[0]:
                return override
        return None

    def eval_raw(self, x: Sequence[float], t: float = 0.0) -> FloatArray:
        """Pointwise value with overrides honored.

        On a surface without override the lexicographically smallest adjacent owned cell is used.

        Args:
            x: The point.
            t: The time.

        Raises:
            UncoveredCellError: If no owned cell is adjacent to the point.

        Returns:
            The value vector.
        """
        point = self._check_inside(x)
        if (override := self.override_at(point)) is not None:
            return np.asarray(override.value, dtype=np.float64)
        cells = self.adjacent_cells(point)
        if not cells:
            signs = "".join("+" if v > 0 else "-" for v in self.switch_values(point[None, :])[0])
            raise UncoveredCellError(signs)
        return self.branch_value(cells[0], point, t)

    def eval_cells_many(self, xs: FloatArray, t: float = 0.0) -> FloatArray:
        """Branch values at points off the surfaces, overrides ignored.

        Args:
            xs: Points of shape (N, m).
            t: The time.

        Returns:
            Values of shape (N, n); NaN rows for points in unowned cells.
        """
        xs = np.atleast_2d(xs)
        signs = self.switch_values(xs) > 0
        result = np.full((xs.shape[0], self.codomain_dim), np.nan)
        for cell in self.branches:
            mask = np.all(signs == np.array([c == "+" for c in cell.signs], dtype=bool), axis=1)
            if np.any(mask):
                result[mask] = self.branch_values(cell, xs[mask], t)
        return result

    def is_continuous_at(self, x: Sequence[float], tol: float = 1e-9, t: float = 0.0) -> bool:
        """Whether all adjacent branch values agree and no override conflicts with them.

        Args:
            x: The point.
            tol: Agreement tolerance in the max norm.
            t: The time.

        Returns:
            True if the map is continuous at the point.
        """
        point = self._check_inside(x)
        cells = self.adjacent_cells(point)
        if not cells:
            return False
        values = np.stack([self.branch_value(cell, point, t) for cell in cells])
        if not np.all(np.isfinite(values)):
            return False
        if float(np.max(np.ptp(values, axis=0))) > tol:
            return False
        override = self.override_at(point)
        return override is None or bool(
            np.max(np.abs(np.asarray(override.value) - values[0])) <= tol
        )

    def validate(
        self, seed: int = 0, samples: int = SURFACE_DEFAULTS.validation_samples, t: float = 0.0
    ) -> None:
        """Load time checks: regular surfaces, coverage of sampled cells, defined branches.

        Args:
            seed: The run seed.
            samples: Number of domain samples.
            t: Time at which time dependent branches are checked.

        Raises:
            UncoveredCellError: If a sampled point lands in a cell without a branch.
            BranchDomainError: If a branch is undefined at a sampled point of its cell.
        """
        for switch in self.switches:
            region.validate_regular_surface(switch, self.domain, seed=seed)
        rng = sampling.generator(seed, COVERAGE_STREAM)
        points = sampling.uniform_in_box(
            rng, self.domain.lower_array, self.domain.upper_array, samples
        )
        values = self.switch_values(points)
        clear = np.all(np.abs(values) > self.tolerance, axis=1)
        points, values = points[clear], values[clear]
        keys = ["".join("+" if v > 0 else "-" for v in row) for row in values]
        for key in sorted(set(keys)):
            if CellId(key) not in self.branches:
                raise UncoveredCellError(key)
        keys_array = np.asarray(keys)
        for cell in self.branches:
            cell_points = points[keys_array == cell.signs] if keys else points[:0]
            if cell_points.shape[0] and not np.all(
                np.isfinite(self.branch_values(cell, cell_points, t))
            ):
                raise BranchDomainError(f"Branch of cell {cell} is undefined inside its cell")
        logger.info(
            "Validated map with %s switches and %s branches.",
            len(self.switches),
            len(self.branches),
        )
