# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for domain boxes, fat regions, null sets, negligibility ideals and measures."""

import dataclasses
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Sequence, Union

import numpy as np

from filippov_toolkit import interval, sampling
from filippov_toolkit.config import RANGE_DEFAULTS, SURFACE_DEFAULTS, IdealKind
from filippov_toolkit.errors import (
    DimensionMismatchError,
    InvalidBoxError,
    IrregularSurfaceError,
    NegativeDensityError,
    SampleBudgetError,
)
from filippov_toolkit.expr import BoolArray, Expr, FloatArray, Neg

logger = logging.getLogger(__name__)

MIN_BUDGET = 1000
CHUNK_SIZE = 4096
PROOF_MAX_BOXES = 4096
PROOF_MAX_LEVELS = 40
MEMBERSHIP_TOLERANCE = 1e-12

# Substream identifiers of load time validations, disjoint from measure chunks.
DENSITY_STREAM = 2**62
SURFACE_STREAM = 2**62 + 1


@dataclasses.dataclass(frozen=True)
class DomainBox:
    """Axis aligned box with nonempty interior.

    Attributes:
        lower: The lower corner.
        upper: The upper corner.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        """Validate the corners.

        Raises:
            InvalidBoxError: If the corners differ in length, are not finite or not ordered.
        """
        if len(self.lower) != len(self.upper) or not self.lower:
            raise InvalidBoxError(f"Box corners have mismatched lengths: {self}")
        if not all(math.isfinite(value) for value in (*self.lower, *self.upper)):
            raise InvalidBoxError(f"Box bounds must be finite: {self}")
        if not all(low < high for low, high in zip(self.lower, self.upper)):
            raise InvalidBoxError(f"Box must have a nonempty interior: {self}")

    @classmethod
    def of(cls, lower: Sequence[float], upper: Sequence[float]) -> "DomainBox":
        """Build a box from any float sequences.

        Args:
            lower: The lower corner.
            upper: The upper corner.

        Returns:
            The box.
        """
        return cls(lower=tuple(float(v) for v in lower), upper=tuple(float(v) for v in upper))

    @property
    def dim(self) -> int:
        """The dimension."""
        return len(self.lower)

    @property
    def lower_array(self) -> FloatArray:
        """The lower corner as an array."""
        return np.asarray(self.lower, dtype=np.float64)

    @property
    def upper_array(self) -> FloatArray:
        """The upper corner as an array."""
        return np.asarray(self.upper, dtype=np.float64)

    @property
    def volume(self) -> float:
        """The Lebesgue volume."""
        return float(np.prod(self.upper_array - self.lower_array))

    @property
    def diameter(self) -> float:
        """The Euclidean length of the diagonal."""
        return float(np.linalg.norm(self.upper_array - self.lower_array))

    @property
    def center(self) -> FloatArray:
        """The center point."""
        return (self.lower_array + self.upper_array) / 2.0

    def contains(self, xs: FloatArray, tol: float = 0.0) -> BoolArray:
        """Closed membership of points.

        Args:
            xs: Points of shape (N, m).
            tol: Slack added on every side.

        Returns:
            Boolean mask of shape (N,).
        """
        xs = np.atleast_2d(xs)
        return np.all(
            (xs >= self.lower_array - tol) & (xs <= self.upper_array + tol), axis=1
        )

    def contains_box(self, other: "DomainBox") -> bool:
        """Whether another box lies inside this one.

        Args:
            other: The candidate box.

        Returns:
            True if the other box is contained.
        """
        return bool(
            np.all(other.lower_array >= self.lower_array)
            and np.all(other.upper_array <= self.upper_array)
        )

    def intersect(self, other: "DomainBox") -> "DomainBox | None":
        """Intersect with another box.

        Args:
            other: The other box.

        Returns:
            The intersection, or None when its interior is empty.
        """
        lower = np.maximum(self.lower_array, other.lower_array)
        upper = np.minimum(self.upper_array, other.upper_array)
        if np.any(lower >= upper):
            return None
        return DomainBox.of(lower, upper)

    def around(self, center: Sequence[float], radius: float) -> "DomainBox | None":
        """Intersect with the cube circumscribing a ball.

        Args:
            center: The ball center.
            radius: The ball radius.

        Returns:
            The clipped box, or None when it has an empty interior.
        """
        center_array = np.asarray(center, dtype=np.float64)
        cube = np.stack([center_array - radius, center_array + radius])
        lower = np.maximum(self.lower_array, cube[0])
        upper = np.minimum(self.upper_array, cube[1])
        if np.any(lower >= upper):
            return None
        return DomainBox.of(lower, upper)


@dataclasses.dataclass(frozen=True)
class Constraint:
    """Strict sign condition on an expression.

    Attributes:
        expr: The constrained expression.
        sign: ">" for expr > 0, "<" for expr < 0.
    """

    expr: Expr
    sign: str

    def __post_init__(self) -> None:
        """Validate the sign.

        Raises:
            ValueError: If the sign is neither ">" nor "<".
        """
        if self.sign not in (">", "<"):
            raise ValueError(f"Constraint sign must be '>' or '<', got {self.sign!r}")

    def margin(self, xs: FloatArray, t: float = 0.0) -> FloatArray:
        """Signed slack, positive where the constraint holds.

        Args:
            xs: Points of shape (N, m).
            t: The time.

        Returns:
            The slack; NaN where the expression is undefined.
        """
        values = self.expr.evaluate_many(xs, t)
        return values if self.sign == ">" else -values

    def holds(self, xs: FloatArray, t: float = 0.0) -> BoolArray:
        """Evaluate the constraint at points.

        Args:
            xs: Points of shape (N, m).
            t: The time.

        Returns:
            Boolean mask; False where the expression is undefined.
        """
        return self.margin(xs, t) > 0.0

    def contradicts(self, other: "Constraint") -> bool:
        """Whether the two constraints can never hold together.

        Args:
            other: The other constraint.

        Returns:
            True for (e > 0, e < 0) and (e > 0, -e > 0) style pairs.
        """
        if self.expr == other.expr:
            return self.sign != other.sign
        if isinstance(other.expr.root, Neg) and other.expr.root.operand == self.expr.root:
            return self.sign == other.sign
        if isinstance(self.expr.root, Neg) and self.expr.root.operand == other.expr.root:
            return self.sign == other.sign
        return False


Conjunction = tuple[Constraint, ...]


@dataclasses.dataclass(frozen=True)
class SurfaceGenerator:
    """Zero set {expr = 0} of a regular expression.

    Attributes:
        expr: The surface expression.
    """

    expr: Expr

    def contains(self, xs: FloatArray, tol: float) -> BoolArray:
        """Membership of points within a tolerance.

        Args:
            xs: Points of shape (N, m).
            tol: Bound on |expr|.

        Returns:
            Boolean mask.
        """
        return np.abs(self.expr.evaluate_many(xs)) <= tol


@dataclasses.dataclass(frozen=True)
class DegenerateBox:
    """Box with at least one zero width side.

    Attributes:
        lower: The lower corner.
        upper: The upper corner.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        """Validate the corners.

        Raises:
            InvalidBoxError: If the box is unordered or has a nonempty interior.
        """
        if len(self.lower) != len(self.upper):
            raise InvalidBoxError(f"Box corners have mismatched lengths: {self}")
        if not all(low <= high for low, high in zip(self.lower, self.upper)):
            raise InvalidBoxError(f"Degenerate box corners are not ordered: {self}")
        if not any(low == high for low, high in zip(self.lower, self.upper)):
            raise InvalidBoxError(f"Degenerate box has a nonempty interior: {self}")

    def contains(self, xs: FloatArray, tol: float) -> BoolArray:
        """Membership of points within a tolerance.

        Args:
            xs: Points of shape (N, m).
            tol: Slack on every side.

        Returns:
            Boolean mask.
        """
        xs = np.atleast_2d(xs)
        return np.all(
            (xs >= np.asarray(self.lower) - tol) & (xs <= np.asarray(self.upper) + tol), axis=1
        )

    def within(self, other: "DegenerateBox") -> bool:
        """Whether this box lies inside another.

        Args:
            other: The candidate container.

        Returns:
            True if contained.
        """
        return all(
            o_low <= low and high <= o_high
            for low, high, o_low, o_high in zip(self.lower, self.upper, other.lower, other.upper)
        )


@dataclasses.dataclass(frozen=True)
class PointList:
    """Finite set of points.

    Attributes:
        points: The points.
    """

    points: tuple[tuple[float, ...], ...]

    def contains(self, xs: FloatArray, tol: float) -> BoolArray:
        """Membership of points within a max-norm tolerance.

        Args:
            xs: Points of shape (N, m).
            tol: Max-norm distance bound.

        Returns:
            Boolean mask.
        """
        xs = np.atleast_2d(xs)
        if not self.points:
            return np.zeros(xs.shape[0], dtype=bool)
        anchors = np.asarray(self.points, dtype=np.float64)
        distance = np.abs(xs[:, None, :] - anchors[None, :, :]).max(axis=2)
        return np.any(distance <= tol, axis=1)


Generator = Union[SurfaceGenerator, DegenerateBox, PointList]


@dataclasses.dataclass(frozen=True)
class NullSet:
    """Finite union of Lebesgue null generators.

    Attributes:
        generators: The generators.
    """

    generators: tuple[Generator, ...] = ()

    @property
    def is_empty(self) -> bool:
        """Whether no generator is listed."""
        return not self.generators

    def contains(self, xs: FloatArray, tol: float = MEMBERSHIP_TOLERANCE) -> BoolArray:
        """Membership of points within a tolerance.

        Args:
            xs: Points of shape (N, m).
            tol: Generator specific tolerance.

        Returns:
            Boolean mask.
        """
        mask = np.zeros(np.atleast_2d(xs).shape[0], dtype=bool)
        for generator_ in self.generators:
            mask |= generator_.contains(xs, tol)
        return mask

    def union(self, other: "NullSet") -> "NullSet":
        """Union of generator lists, dropping duplicates.

        Args:
            other: The other null set.

        Returns:
            The union.
        """
        return NullSet(generators=tuple(dict.fromkeys((*self.generators, *other.generators))))


@dataclasses.dataclass(frozen=True)
class NegligibilityIdeal:
    """Family of negligible sets.

    Attributes:
        kind: Lebesgue null sets, or sets covered by finitely many listed generators.
        generators: The listed generators of a generated ideal.
    """

    kind: IdealKind = IdealKind.LEBESGUE_NULL
    generators: tuple[Generator, ...] = ()

    def covers(self, generator_: Generator) -> bool:
        """Symbolic containment of a generator in some listed generator.

        Args:
            generator_: The generator to test.

        Returns:
            True if a listed generator structurally contains it.
        """
        if self.kind == IdealKind.LEBESGUE_NULL:
            return True
        match generator_:
            case SurfaceGenerator(expr=expr):
                return any(
                    isinstance(item, SurfaceGenerator)
                    and (item.expr == expr or Neg(operand=item.expr.root) == expr.root)
                    for item in self.generators
                )
            case DegenerateBox():
                return any(
                    isinstance(item, DegenerateBox) and generator_.within(item)
                    for item in self.generators
                )
        points = np.asarray(generator_.points, dtype=np.float64)
        if points.size == 0:
            return True
        covered = np.zeros(points.shape[0], dtype=bool)
        for item in self.generators:
            if isinstance(item, SurfaceGenerator) and item.expr.dim != points.shape[1]:
                continue
            covered |= item.contains(points, MEMBERSHIP_TOLERANCE)
        return bool(np.all(covered))


LEBESGUE = NegligibilityIdeal()


@dataclasses.dataclass(frozen=True)
class Region:
    """Fat subset of a base box: a union of strict constraint conjunctions.

    Attributes:
        base: The base box.
        cells: Conjunctions whose union is the region; ((),) is the whole box, () is empty.
        exclusions: Null sets removed from the region; they change neither closure nor measure.
    """

    base: DomainBox
    cells: tuple[Conjunction, ...] = ((),)
    exclusions: tuple[NullSet, ...] = ()

    @classmethod
    def whole(cls, base: DomainBox) -> "Region":
        """The whole base box.

        Args:
            base: The base box.

        Returns:
            The region.
        """
        return cls(base=base)

    @classmethod
    def where(cls, base: DomainBox, constraints: Sequence[Constraint]) -> "Region":
        """A single conjunction of constraints.

        Args:
            base: The base box.
            constraints: The constraints.

        Returns:
            The region.
        """
        return cls(base=base, cells=(tuple(constraints),))

    @property
    def mode(self) -> str:
        """Either "single-cell" or "union-of-cells"."""
        return "single-cell" if len(self.cells) == 1 else "union-of-cells"

    @property
    def is_whole(self) -> bool:
        """Whether the region is the whole base box."""
        return any(not cell for cell in self.cells)

    def contains(self, xs: FloatArray, t: float = 0.0) -> BoolArray:
        """Membership of points.

        Args:
            xs: Points of shape (N, m).
            t: The time.

        Returns:
            Boolean mask.
        """
        xs = np.atleast_2d(xs)
        mask = np.zeros(xs.shape[0], dtype=bool)
        inside = self.base.contains(xs)
        for cell in self.cells:
            cell_mask = inside.copy()
            for constraint in cell:
                cell_mask &= constraint.holds(xs, t)
            mask |= cell_mask
        return mask


def region_intersect(a: Region, b: Region) -> Region:
    """Intersect two regions.

    Args:
        a: The first region.
        b: The second region.

    Raises:
        DimensionMismatchError: If the regions live in different dimensions.

    Returns:
        The conjunction of both regions, cell by cell.
    """
    if a.base.dim != b.base.dim:
        raise DimensionMismatchError(
            f"Cannot intersect regions of dims {a.base.dim} and {b.base.dim}"
        )
    base = a.base.intersect(b.base)
    if base is None:
        return Region(base=a.base, cells=())
    cells = tuple(
        tuple(dict.fromkeys((*left, *right)))
        for left, right in itertools.product(a.cells, b.cells)
    )
    return Region(base=base, cells=cells, exclusions=a.exclusions + b.exclusions)


def region_subtract_null(a: Region, n: NullSet) -> Region:
    """Remove a null set from a region.

    Args:
        a: The region.
        n: The null set.

    Returns:
        The same region with n recorded as an exclusion.
    """
    return dataclasses.replace(a, exclusions=(*a.exclusions, n))


def region_union(a: Region, b: Region) -> Region:
    """Unite two regions over the same base.

    Args:
        a: The first region.
        b: The second region.

    Raises:
        DimensionMismatchError: If the regions have different base boxes.

    Returns:
        The region whose cells are the cells of both.
    """
    if a.base != b.base:
        raise DimensionMismatchError("Cannot unite regions over different base boxes")
    return Region(base=a.base, cells=a.cells + b.cells, exclusions=a.exclusions + b.exclusions)


def _conjunction_is_empty(base: DomainBox, cell: Conjunction, t: float) -> bool:
    """Prove a conjunction infeasible by branch and bound on interval enclosures.

    Args:
        base: The base box.
        cell: The constraints.
        t: The time.

    Returns:
        True if the conjunction is proven empty, False if a witness was found or the proof
        ran out of boxes.
    """
    if any(a.contradicts(b) for a, b in itertools.combinations(cell, 2)):
        return True
    if not cell:
        return False
    lower, upper = base.lower_array[None, :], base.upper_array[None, :]
    for level in range(PROOF_MAX_LEVELS):
        infeasible = np.zeros(lower.shape[0], dtype=bool)
        certain = np.ones(lower.shape[0], dtype=bool)
        centers = (lower + upper) / 2.0
        witness = np.ones(lower.shape[0], dtype=bool)
        for constraint in cell:
            low, high = interval.bounds(constraint.expr, lower, upper, t)
            if constraint.sign == "<":
                low, high = -high, -low
            infeasible |= high <= 0.0
            certain &= low > 0.0
            witness &= constraint.holds(centers, t)
        if np.any((certain | witness) & ~infeasible):
            logger.debug("Conjunction has a witness at refinement level %s.", level)
            return False
        lower, upper = lower[~infeasible], upper[~infeasible]
        if lower.shape[0] == 0:
            return True
        if 2 * lower.shape[0] > PROOF_MAX_BOXES:
            break
        axis = np.argmax(upper - lower, axis=1)
        rows = np.arange(lower.shape[0])
        middle = (lower[rows, axis] + upper[rows, axis]) / 2.0
        left_upper, right_lower = upper.copy(), lower.copy()
        left_upper[rows, axis] = middle
        right_lower[rows, axis] = middle
        lower = np.concatenate([lower, right_lower])
        upper = np.concatenate([left_upper, upper])
    logger.debug("Emptiness proof gave up with %s open boxes.", lower.shape[0])
    return False


def is_provably_empty(region: Region, t: float = 0.0) -> bool:
    """Whether every cell of a region is certified empty.

    Args:
        region: The region.
        t: The time.

    Returns:
        True only when emptiness is proven symbolically or by interval enclosures.
    """
    return all(_conjunction_is_empty(region.base, cell, t) for cell in region.cells)


@dataclasses.dataclass(frozen=True)
class MeasureModel:
    """Measure with an optional density and support on a base box.

    Attributes:
        base: The base box.
        density: Optional nonnegative density w(x); Lebesgue when absent.
        support: Optional fat region outside of which the density vanishes.
    """

    base: DomainBox
    density: Expr | None = None
    support: Region | None = None

    def __post_init__(self) -> None:
        """Validate the density on samples of the base.

        Raises:
            NegativeDensityError: If the density is negative or undefined at a sample.
            DimensionMismatchError: If density or support dimension differs from the base.
        """
        if self.support is not None and self.support.base.dim != self.base.dim:
            raise DimensionMismatchError("Support region and base box differ in dimension")
        if self.density is None:
            return
        if self.density.dim != self.base.dim:
            raise DimensionMismatchError("Density and base box differ in dimension")
        rng = sampling.generator(0, DENSITY_STREAM)
        points = sampling.uniform_in_box(
            rng, self.base.lower_array, self.base.upper_array, SURFACE_DEFAULTS.validation_samples
        )
        values = self.density.evaluate_many(points)
        if not np.all(values >= 0.0):
            bad = points[np.argmin(np.nan_to_num(values, nan=-np.inf))]
            raise NegativeDensityError(
                f"Density {self.density.text} is negative or undefined at {bad.tolist()}"
            )

    @property
    def is_lebesgue(self) -> bool:
        """Whether the model is plain Lebesgue measure."""
        return self.density is None and self.support is None

    def weights(self, xs: FloatArray) -> FloatArray:
        """Density values including the support indicator.

        Args:
            xs: Points of shape (N, m).

        Returns:
            Nonnegative weights of shape (N,).
        """
        xs = np.atleast_2d(xs)
        values = (
            np.ones(xs.shape[0]) if self.density is None else self.density.evaluate_many(xs)
        )
        if self.support is not None:
            values = np.where(self.support.contains(xs), values, 0.0)
        return values

    def restrict(self, region: Region) -> Region:
        """Intersect a region with the support.

        Args:
            region: The region.

        Returns:
            The region restricted to where the measure lives.
        """
        return region if self.support is None else region_intersect(region, self.support)

    def charges_open_sets(self, samples: int = SURFACE_DEFAULTS.validation_samples) -> bool:
        """Whether every nonempty open subset of the base has positive measure.

        Args:
            samples: Number of density samples.

        Returns:
            False when a support region cuts the base or the density vanishes at a sample.
        """
        if self.support is not None and not self.support.is_whole:
            return False
        if self.density is None:
            return True
        rng = sampling.generator(0, DENSITY_STREAM)
        points = sampling.uniform_in_box(
            rng, self.base.lower_array, self.base.upper_array, samples
        )
        return bool(np.all(self.density.evaluate_many(points) > 0.0))


class MeasureEstimate(NamedTuple):
    """Monte Carlo measure estimate.

    Attributes:
        estimate: The estimated measure.
        ci_halfwidth: The confidence interval half width.
    """

    estimate: float
    ci_halfwidth: float


def _chunk_moments(
    region: Region, model: MeasureModel, seed: int, chunk: int, count: int, t: float
) -> tuple[float, float, int]:
    """Sum and sum of squares of weighted indicators on one substream.

    Args:
        region: The region.
        model: The measure model.
        seed: The run seed.
        chunk: The chunk index, used as substream identifier.
        count: The number of samples of the chunk.
        t: The time.

    Returns:
        The sum, the sum of squares and the hit count.
    """
    rng = sampling.generator(seed, chunk)
    points = sampling.uniform_in_box(rng, region.base.lower_array, region.base.upper_array, count)
    inside = region.contains(points, t)
    values = np.where(inside, model.weights(points), 0.0) * region.base.volume
    return float(values.sum()), float(np.square(values).sum()), int(inside.sum())


def measure_estimate(
    region: Region,
    model: MeasureModel,
    budget: int = RANGE_DEFAULTS.budget,
    seed: int = 0,
    confidence: float = RANGE_DEFAULTS.confidence,
    workers: int = 1,
    t: float = 0.0,
) -> MeasureEstimate:
    """Estimate the measure of a region.

    The budget is split in fixed size chunks, each drawn from its own (seed, chunk) substream
    and summed in chunk order, so the result does not depend on the number of workers.

    Args:
        region: The region.
        model: The measure model.
        budget: The number of samples.
        seed: The run seed.
        confidence: Confidence level of the half width.
        workers: Number of threads evaluating chunks.
        t: The time.

    Raises:
        SampleBudgetError: If the budget is below the supported minimum.
        DimensionMismatchError: If region and model differ in dimension.

    Returns:
        The estimate and its normal approximation half width.
    """
    if budget < MIN_BUDGET:
        raise SampleBudgetError(f"Sample budget must be at least {MIN_BUDGET}, got {budget}")
    if region.base.dim != model.base.dim:
        raise DimensionMismatchError("Region and measure model differ in dimension")
    if model.is_lebesgue and region.is_whole:
        return MeasureEstimate(region.base.volume, 0.0)
    if is_provably_empty(model.restrict(region), t):
        return MeasureEstimate(0.0, 0.0)
    counts = [min(CHUNK_SIZE, budget - start) for start in range(0, budget, CHUNK_SIZE)]

    def run(chunk: int) -> tuple[float, float, int]:
        """Evaluate one chunk.

        Args:
            chunk: The chunk index.

        Returns:
            The chunk moments.
        """
        return _chunk_moments(region, model, seed, chunk, counts[chunk], t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            moments = list(executor.map(run, range(len(counts))))
    else:
        moments = [run(chunk) for chunk in range(len(counts))]
    total = sum(moment[0] for moment in moments)
    total_squares = sum(moment[1] for moment in moments)
    mean = total / budget
    variance = max(total_squares / budget - mean * mean, 0.0) * budget / (budget - 1)
    half_width = sampling.normal_quantile(confidence) * math.sqrt(variance / budget)
    logger.debug("Measure estimate %s +- %s from %s samples.", mean, half_width, budget)
    return MeasureEstimate(mean, half_width)


def is_negligible(
    s: NullSet | Region, ideal: NegligibilityIdeal, model: MeasureModel, t: float = 0.0
) -> bool:
    """Membership in a negligibility ideal, certified without Monte Carlo.

    Args:
        s: The null set or region to test.
        ideal: The ideal.
        model: The measure model; its support restricts regions.
        t: The time.

    Returns:
        True only when membership is certified.
    """
    if isinstance(s, NullSet):
        return all(ideal.covers(generator_) for generator_ in s.generators)
    return is_provably_empty(model.restrict(s), t)


def validate_regular_surface(
    expr: Expr,
    base: DomainBox,
    seed: int = 0,
    samples: int = SURFACE_DEFAULTS.validation_samples,
    band: float = SURFACE_DEFAULTS.band,
    threshold: float = SURFACE_DEFAULTS.gradient_threshold,
) -> int:
    """Check that a surface expression has a nonvanishing gradient on its zero set.

    Samples of the base are pulled onto the surface by Newton steps along the gradient; every
    projected sample inside the band {|expr| < band} must have a gradient norm above threshold.

    Args:
        expr: The surface expression.
        base: The box the surface is used in.
        seed: The run seed.
        samples: Number of samples.
        band: Half width of the band around the surface.
        threshold: Minimal gradient norm.

    Raises:
        IrregularSurfaceError: If the gradient vanishes at a sample on the surface.

    Returns:
        The number of band samples checked.
    """
    rng = sampling.generator(seed, SURFACE_STREAM)
    points = sampling.uniform_in_box(rng, base.lower_array, base.upper_array, samples)
    for _ in range(25):
        values, grads, _ = expr.gradient_many(points)
        norms = np.einsum("ij,ij->i", grads, grads)
        usable = np.isfinite(values) & np.isfinite(norms) & (norms > 0.0)
        step = np.where(usable, values / np.where(usable, norms, 1.0), 0.0)
        points = points - step[:, None] * np.where(usable[:, None], grads, 0.0)
    values, grads, _ = expr.gradient_many(points)
    in_band = base.contains(points) & (np.abs(values) < band)
    norms = np.linalg.norm(grads[in_band], axis=1)
    if np.any(~(norms > threshold)):
        bad = points[in_band][np.argmin(np.nan_to_num(norms, nan=0.0))]
        raise IrregularSurfaceError(
            f"Surface {expr.text} has a vanishing gradient near {bad.tolist()}"
        )
    logger.debug("Surface %s regular at %s band samples.", expr.text, int(in_band.sum()))
    return int(in_band.sum())
