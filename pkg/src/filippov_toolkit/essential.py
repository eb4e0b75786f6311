# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for good and bad values, essential ranges and canonical null sets.

A value y is bad when some ball around it has a negligible preimage. Bad verdicts are only
issued when the preimage is certified empty (up to null overrides); good verdicts rest on a
sample point of an open preimage, found by a zooming local search.
"""

import dataclasses
import itertools
import logging
import math
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from filippov_toolkit import convex, interval, sampling
from filippov_toolkit.config import RANGE_DEFAULTS, IdealKind
from filippov_toolkit.errors import (
    DimensionMismatchError,
    NotNegligibleError,
    RegionContainmentError,
    ResolutionError,
)
from filippov_toolkit.expr import BinOp, BoolArray, Expr, FloatArray, ball_margin, constant
from filippov_toolkit.piecewise import CellId, PiecewiseMap
from filippov_toolkit.region import (
    LEBESGUE,
    Constraint,
    DomainBox,
    MeasureModel,
    NegligibilityIdeal,
    NullSet,
    PointList,
    Region,
    SurfaceGenerator,
    is_negligible,
    is_provably_empty,
    region_intersect,
)

logger = logging.getLogger(__name__)

CLASSIFY_STREAM = 2**61
COVER_STREAM = 2**61 + 1
ZOOM_SAMPLES = 512
ZOOM_LEVELS = 40
SEED_LEVELS = 8
EXACT_TOLERANCE = 1e-12


class Verdict(str, Enum):
    """Classification of a value.

    Attributes:
        GOOD: Every neighbourhood has a preimage of positive measure.
        BAD: Some neighbourhood has a negligible preimage.
    """

    GOOD = "good"
    BAD = "bad"


@dataclasses.dataclass(frozen=True)
class PointClass:
    """Verdict on a value with its witness.

    Attributes:
        value: The classified value.
        verdict: Good or bad.
        radius: For bad values the radius of a ball with negligible preimage, for good values
            the smallest tested radius.
        measure_lower_bound: Lower bound on the Lebesgue volume of the preimage of the smallest
            ball, inf when an override set outside of the ideal carries the value.
        low_confidence: The good verdict is a default, neither a hit nor a proof was found.
        surface_limit: The value was only found as a limit towards a switching surface.
    """

    value: tuple[float, ...]
    verdict: Verdict
    radius: float
    measure_lower_bound: float = 0.0
    low_confidence: bool = False
    surface_limit: bool = False


Box = tuple[tuple[float, ...], tuple[float, ...]]


@dataclasses.dataclass(frozen=True)
class EssentialRange:
    """Exact value set or box cover of the essential range.

    Attributes:
        resolution: The codomain box width of the cover.
        values: The exact values, None for a covered range.
        boxes: The covering codomain boxes.
        representatives: Good values found inside the cover.
        resolution_reached: Whether every box reached the resolution.
        low_confidence: Whether a value or box is kept without a certifying sample.
    """

    resolution: float
    values: tuple[tuple[float, ...], ...] | None = None
    boxes: tuple[Box, ...] = ()
    representatives: tuple[tuple[float, ...], ...] = ()
    resolution_reached: bool = True
    low_confidence: bool = False

    @property
    def is_exact(self) -> bool:
        """Whether the range is a finite value set."""
        return self.values is not None

    def as_boxes(self) -> FloatArray:
        """Boxes of shape (K, 2, n); exact values become degenerate boxes.

        Returns:
            The box array.
        """
        if self.values is not None:
            if not self.values:
                return np.zeros((0, 2, 0))
            points = np.asarray(self.values, dtype=np.float64)
            return np.stack([points, points], axis=1)
        if not self.boxes:
            return np.zeros((0, 2, 0))
        return np.asarray(self.boxes, dtype=np.float64)

    def points(self) -> FloatArray:
        """Points whose convex hull approximates the hull of the range.

        Returns:
            Points of shape (K, n).
        """
        if self.values is not None:
            if not self.values:
                return np.zeros((0, 0))
            return np.asarray(self.values, dtype=np.float64)
        if self.representatives:
            return np.asarray(self.representatives, dtype=np.float64)
        return self.as_boxes().mean(axis=1)

    def directed_distance(self, other: "EssentialRange") -> float:
        """Upper bound of sup over this range of the distance to the other.

        Args:
            other: The other range.

        Returns:
            The bound, inf if the other range is empty and this one is not.
        """
        mine, theirs = self.as_boxes(), other.as_boxes()
        if mine.shape[0] == 0:
            return 0.0
        if theirs.shape[0] == 0:
            return math.inf
        dim = mine.shape[2]
        choices = np.asarray(list(itertools.product((0, 1), repeat=dim)))
        worst = 0.0
        for start in range(0, mine.shape[0], 256):
            chunk = mine[start : start + 256]
            corners = chunk[:, choices, np.arange(dim)]
            clipped = np.clip(
                corners[:, :, None, :], theirs[None, None, :, 0], theirs[None, None, :, 1]
            )
            distance = np.linalg.norm(clipped - corners[:, :, None, :], axis=3)
            worst = max(worst, float(distance.max(axis=1).min(axis=1).max()))
        return worst

    def hausdorff(self, other: "EssentialRange") -> float:
        """Upper bound of the Hausdorff distance between the two ranges.

        Args:
            other: The other range.

        Returns:
            The bound.
        """
        return max(self.directed_distance(other), other.directed_distance(self))

    def contains_within(self, other: "EssentialRange", tol: float) -> bool:
        """Whether this range lies inside another up to a tolerance.

        Args:
            other: The candidate superset.
            tol: The tolerance.

        Returns:
            True if contained.
        """
        return self.directed_distance(other) <= tol


@dataclasses.dataclass(frozen=True)
class CanonicalNullSet:
    """Null set whose removal makes the closure of the image equal the essential range.

    Attributes:
        components: Switching surfaces and override sets meeting the region.
        region: The queried region.
        outside_support: Support region of the measure; its complement is also removed.
    """

    components: NullSet
    region: Region
    outside_support: Region | None = None


@dataclasses.dataclass(frozen=True)
class RestrictionReport:
    """Comparison of a restriction with its parent.

    Attributes:
        restricted: Essential range over the subregion.
        parent: Essential range over the parent region.
        range_contained: Whether the restricted range lies in the parent range.
        null_contained: Whether the parent canonical null set, cut to the subregion, is covered
            by the canonical null set of the subregion.
        deviation: Directed distance from the restricted to the parent range.
    """

    restricted: EssentialRange
    parent: EssentialRange
    range_contained: bool
    null_contained: bool
    deviation: float


@dataclasses.dataclass(frozen=True)
class _Hit:
    """Sample of an open preimage.

    Attributes:
        value: The value at the sample.
        lower_bound: Lower bound on the volume of the preimage inside the search window.
        zoomed: Whether the search had to zoom in.
        window: The search window.
    """

    value: FloatArray
    lower_bound: float
    zoomed: bool
    window: DomainBox


def radius_schedule(
    initial: float = RANGE_DEFAULTS.initial_radius,
    factor: float = RANGE_DEFAULTS.radius_factor,
    steps: int = RANGE_DEFAULTS.radius_steps,
) -> tuple[float, ...]:
    """Geometric shrinking radii.

    Args:
        initial: The first radius.
        factor: Division factor between successive radii.
        steps: Number of radii.

    Returns:
        The decreasing radii.
    """
    return tuple(initial / factor**step for step in range(steps))


def _effective_model(model: MeasureModel | None, f: PiecewiseMap, ideal: NegligibilityIdeal):
    """Measure model used for positivity decisions.

    Under a generated ideal every set outside the ideal counts as large, so the density and
    its support play no role.

    Args:
        model: The requested model.
        f: The map.
        ideal: The ideal.

    Returns:
        The model.
    """
    if model is None or ideal.kind == IdealKind.GENERATED:
        return MeasureModel(base=f.domain if model is None else model.base)
    return model


def _relevant_cells(
    f: PiecewiseMap, q: Region, model: MeasureModel, t: float
) -> list[tuple[CellId, Region]]:
    """Owned cells meeting the region where the measure lives.

    Args:
        f: The map.
        q: The region.
        model: The measure model.
        t: The time.

    Returns:
        Pairs of cell and cell region that are not provably empty.
    """
    result = []
    for cell in f.owned_cells:
        cell_region = model.restrict(region_intersect(q, f.cell_region(cell)))
        if not is_provably_empty(cell_region, t):
            result.append((cell, cell_region))
    return result


def _region_mask(cell_region: Region, model: MeasureModel, xs: FloatArray, t: float):
    """Points of a region where the density is positive.

    Args:
        cell_region: The region.
        model: The measure model.
        xs: Points of shape (N, m).
        t: The time.

    Returns:
        Boolean mask.
    """
    return cell_region.contains(xs, t) & (model.weights(xs) > 0.0)


def _zoom(  # pylint: disable=too-many-arguments,too-many-locals
    f: PiecewiseMap,
    cell: CellId,
    cell_region: Region,
    model: MeasureModel,
    accept: Callable[[FloatArray], BoolArray],
    score: Callable[[FloatArray], FloatArray],
    rng: np.random.Generator,
    t: float,
    first_samples: int = ZOOM_SAMPLES,
) -> _Hit | None:
    """Search a sample whose value is accepted, halving a search window around the best sample.

    Args:
        f: The map.
        cell: The owned cell.
        cell_region: Where the samples must lie.
        model: The measure model.
        accept: Mask of accepted values.
        score: Distance of values to the target, guiding the zoom.
        rng: The generator.
        t: The time.
        first_samples: Number of samples of the first window.

    Returns:
        The hit, or None.
    """
    base = cell_region.base
    lower, upper = base.lower_array, base.upper_array
    for level in range(ZOOM_LEVELS):
        count = first_samples if level == 0 else ZOOM_SAMPLES
        points = sampling.uniform_in_box(rng, lower, upper, count)
        points = points[_region_mask(cell_region, model, points, t)]
        if points.shape[0] == 0:
            return None
        values = f.branch_values(cell, points, t)
        finite = np.all(np.isfinite(values), axis=1)
        accepted = accept(values) & finite
        if np.any(accepted):
            window = DomainBox.of(lower, upper)
            bound = sampling.lower_confidence_bound(
                int(accepted.sum()), count, RANGE_DEFAULTS.confidence
            )
            return _Hit(
                value=values[np.argmax(accepted)],
                lower_bound=bound * window.volume,
                zoomed=level > 0,
                window=window,
            )
        scores = np.where(finite, score(values), np.inf)
        best = points[np.argmin(scores)]
        half = (upper - lower) / 4.0
        new_lower = np.maximum(base.lower_array, best - half)
        new_upper = np.minimum(base.upper_array, best + half)
        if np.any(new_lower >= new_upper):
            return None
        lower, upper = new_lower, new_upper
    return None


def _touches_surface(f: PiecewiseMap, window: DomainBox) -> bool:
    """Whether a switching surface may cross a search window.

    Args:
        f: The map.
        window: The search window.

    Returns:
        True if some switching enclosure contains 0.
    """
    for switch in f.switches:
        low, high = interval.bounds(switch, window.lower_array, window.upper_array)
        if low[0] <= 0.0 <= high[0]:
            return True
    return False


def _meets(generator_, q: Region) -> bool:
    """Whether a null generator may meet a region.

    Args:
        generator_: The generator.
        q: The region.

    Returns:
        False only when the generator provably misses the region.
    """
    if isinstance(generator_, PointList):
        if not generator_.points:
            return False
        return bool(np.any(q.contains(np.asarray(generator_.points, dtype=np.float64))))
    if isinstance(generator_, SurfaceGenerator):
        above = region_intersect(q, Region.where(q.base, (Constraint(generator_.expr, ">"),)))
        below = region_intersect(q, Region.where(q.base, (Constraint(generator_.expr, "<"),)))
        return not (is_provably_empty(above) or is_provably_empty(below))
    box = np.stack([generator_.lower, generator_.upper]).astype(np.float64)
    return bool(np.all(box[0] <= q.base.upper_array) and np.all(box[1] >= q.base.lower_array))


def _large_override_values(
    f: PiecewiseMap, q: Region, ideal: NegligibilityIdeal
) -> list[tuple[float, ...]]:
    """Override values carried by sets outside of a generated ideal.

    Args:
        f: The map.
        q: The region.
        ideal: The ideal.

    Returns:
        The values, empty under the Lebesgue ideal.
    """
    if ideal.kind == IdealKind.LEBESGUE_NULL:
        return []
    return [
        override.value
        for override in f.overrides
        if any(
            not ideal.covers(generator_) and _meets(generator_, q)
            for generator_ in override.where.generators
        )
    ]


def _preimage_negligible(  # pylint: disable=too-many-arguments
    f: PiecewiseMap,
    cells: list[tuple[CellId, Region]],
    y: FloatArray,
    radius: float,
    ideal: NegligibilityIdeal,
    model: MeasureModel,
    t: float,
) -> bool:
    """Certify that the preimage of the open ball B(y, radius) is negligible.

    Args:
        f: The map.
        cells: The relevant cells with their regions.
        y: The ball center.
        radius: The ball radius.
        ideal: The ideal.
        model: The measure model.
        t: The time.

    Returns:
        True when every cell preimage is empty and the overrides hitting the ball are negligible.
    """
    for cell, cell_region in cells:
        margin = ball_margin([e.root for e in f.branches[cell]], y.tolist(), radius)
        ball = Region.where(cell_region.base, (Constraint(Expr(margin, f.domain.dim), ">"),))
        if not is_provably_empty(region_intersect(cell_region, ball), t):
            return False
    return all(
        is_negligible(override.where, ideal, model)
        for override in f.overrides
        if np.linalg.norm(np.asarray(override.value) - y) < radius
    )


def classify_value(  # pylint: disable=too-many-arguments,too-many-locals
    f: PiecewiseMap,
    q: Region,
    y: Sequence[float],
    ideal: NegligibilityIdeal = LEBESGUE,
    model: MeasureModel | None = None,
    radii: Sequence[float] | None = None,
    seed: int = 0,
    budget: int = RANGE_DEFAULTS.budget,
    t: float = 0.0,
) -> PointClass:
    """Classify a value as good or bad.

    Args:
        f: The map.
        q: The region the map is restricted to.
        y: The value.
        ideal: The negligibility ideal.
        model: The measure model, Lebesgue on the domain if None.
        radii: The shrinking radius schedule.
        seed: The run seed.
        budget: Number of samples of the first window.
        t: The time.

    Raises:
        DimensionMismatchError: If the value has the wrong dimension.

    Returns:
        The verdict with its witness.
    """
    target = np.asarray(y, dtype=np.float64)
    if target.shape != (f.codomain_dim,):
        raise DimensionMismatchError(f"Expected a value of dimension {f.codomain_dim}")
    model = _effective_model(model, f, ideal)
    schedule = tuple(radii) if radii else radius_schedule()
    smallest = min(schedule)
    rng = sampling.generator(seed, CLASSIFY_STREAM)
    cells = _relevant_cells(f, q, model, t)
    value = tuple(float(v) for v in target)

    def score(values: FloatArray) -> FloatArray:
        """Distance to the target.

        Args:
            values: Values of shape (N, n).

        Returns:
            Distances.
        """
        return np.linalg.norm(values - target, axis=1)

    for cell, cell_region in cells:
        hit = _zoom(
            f,
            cell,
            cell_region,
            model,
            lambda values: score(values) < smallest,
            score,
            rng,
            t,
            first_samples=budget,
        )
        if hit is not None:
            return PointClass(
                value=value,
                verdict=Verdict.GOOD,
                radius=smallest,
                measure_lower_bound=hit.lower_bound,
                surface_limit=hit.zoomed and _touches_surface(f, hit.window),
            )
    for carried in _large_override_values(f, q, ideal):
        if np.linalg.norm(np.asarray(carried) - target) < smallest:
            return PointClass(
                value=value, verdict=Verdict.GOOD, radius=smallest, measure_lower_bound=math.inf
            )
    for radius in sorted(schedule, reverse=True):
        if _preimage_negligible(f, cells, target, radius, ideal, model, t):
            logger.debug("Value %s is bad with witness radius %s.", value, radius)
            return PointClass(value=value, verdict=Verdict.BAD, radius=radius)
    logger.warning("Value %s classified good without a certifying sample.", value)
    return PointClass(value=value, verdict=Verdict.GOOD, radius=smallest, low_confidence=True)


def _box_constraints(branch: Sequence[Expr], lower: FloatArray, upper: FloatArray):
    """Constraints lower < branch < upper, componentwise.

    Args:
        branch: The branch expression vector.
        lower: The box lower corner.
        upper: The box upper corner.

    Returns:
        The strict constraints.
    """
    constraints = []
    for component, low, high in zip(branch, lower, upper):
        constraints.append(
            Constraint(Expr(BinOp("-", component.root, constant(float(low))), component.dim), ">")
        )
        constraints.append(
            Constraint(Expr(BinOp("-", component.root, constant(float(high))), component.dim), "<")
        )
    return tuple(constraints)


def _seed_bounds(
    f: PiecewiseMap, cells: list[tuple[CellId, Region]], t: float
) -> list[tuple[FloatArray, FloatArray]]:
    """Enclose the branch image of each cell over its region.

    Args:
        f: The map.
        cells: The relevant cells with their regions.
        t: The time.

    Returns:
        Lower and upper corners of one codomain box per cell whose region meets its base box.
    """
    seeds = []
    for cell, cell_region in cells:
        box_lower = cell_region.base.lower_array[None, :]
        box_upper = cell_region.base.upper_array[None, :]
        for _ in range(SEED_LEVELS):
            axis = np.argmax(box_upper - box_lower, axis=1)
            rows = np.arange(box_lower.shape[0])
            middle = (box_lower[rows, axis] + box_upper[rows, axis]) / 2.0
            left_upper, right_lower = box_upper.copy(), box_lower.copy()
            left_upper[rows, axis] = middle
            right_lower[rows, axis] = middle
            box_lower = np.concatenate([box_lower, right_lower])
            box_upper = np.concatenate([left_upper, box_upper])
        keep = np.zeros(box_lower.shape[0], dtype=bool)
        for conjunction in cell_region.cells:
            feasible = np.ones(box_lower.shape[0], dtype=bool)
            for constraint in conjunction:
                low, high = interval.bounds(constraint.expr, box_lower, box_upper, t)
                feasible &= (high > 0.0) if constraint.sign == ">" else (low < 0.0)
            keep |= feasible
        if not np.any(keep):
            continue
        lower = np.empty(f.codomain_dim)
        upper = np.empty(f.codomain_dim)
        for index, component in enumerate(f.branches[cell]):
            low, high = interval.bounds(component, box_lower[keep], box_upper[keep], t)
            lower[index] = np.min(low)
            upper[index] = np.max(high)
        seeds.append((lower, upper))
    return seeds


def _sample_values(
    f: PiecewiseMap,
    cells: list[tuple[CellId, Region]],
    model: MeasureModel,
    rng: np.random.Generator,
    budget: int,
    t: float,
) -> FloatArray:
    """Branch values at samples of the cell regions where the density is positive.

    Args:
        f: The map.
        cells: The relevant cells with their regions.
        model: The measure model.
        rng: The generator.
        budget: Samples per cell.
        t: The time.

    Returns:
        Values of shape (S, n).
    """
    collected = [np.zeros((0, f.codomain_dim))]
    for cell, cell_region in cells:
        points = sampling.uniform_in_box(
            rng, cell_region.base.lower_array, cell_region.base.upper_array, budget
        )
        points = points[_region_mask(cell_region, model, points, t)]
        if points.shape[0]:
            values = f.branch_values(cell, points, t)
            collected.append(values[np.all(np.isfinite(values), axis=1)])
    return np.concatenate(collected)


def _box_is_empty(
    f: PiecewiseMap, cells: list[tuple[CellId, Region]], lower: FloatArray, upper: FloatArray, t
) -> bool:
    """Certify that no cell maps into the open codomain box.

    Args:
        f: The map.
        cells: The relevant cells with their regions.
        lower: The box lower corner.
        upper: The box upper corner.
        t: The time.

    Returns:
        True if every cell preimage is provably empty.
    """
    for cell, cell_region in cells:
        box = Region.where(cell_region.base, _box_constraints(f.branches[cell], lower, upper))
        if not is_provably_empty(region_intersect(cell_region, box), t):
            return False
    return True


def _inside_hull(hull: convex.ConvexApprox | None, lower: FloatArray, upper: FloatArray) -> bool:
    """Whether a box lies inside a hull.

    Args:
        hull: The hull, None if not available.
        lower: The box lower corner.
        upper: The box upper corner.

    Returns:
        True if every corner is a member of the hull.
    """
    if hull is None:
        return False
    corners = np.asarray(list(itertools.product(*zip(lower, upper))))
    return all(convex.membership(hull, corner, 0.0) for corner in corners)


def _split(lower: FloatArray, upper: FloatArray, resolution: float) -> list[Box]:
    """Bisect every side wider than the resolution.

    Args:
        lower: The box lower corner.
        upper: The box upper corner.
        resolution: The target width.

    Returns:
        The children.
    """
    halves = []
    for low, high in zip(lower, upper):
        if high - low > resolution:
            middle = (low + high) / 2.0
            halves.append(((low, middle), (middle, high)))
        else:
            halves.append(((low, high),))
    return [
        (tuple(part[0] for part in choice), tuple(part[1] for part in choice))
        for choice in itertools.product(*halves)
    ]


def _cover(  # pylint: disable=too-many-arguments,too-many-locals,too-many-branches
    f: PiecewiseMap,
    cells: list[tuple[CellId, Region]],
    model: MeasureModel,
    extra: list[tuple[float, ...]],
    resolution: float,
    rng: np.random.Generator,
    budget: int,
    depth_cap: int,
    max_boxes: int,
    hull_only: bool,
    t: float,
) -> EssentialRange:
    """Refine a codomain box cover of the essential range.

    Args:
        f: The map.
        cells: The relevant cells with their regions.
        model: The measure model.
        extra: Values carried by sets outside of the ideal.
        resolution: The target box width.
        rng: The generator.
        budget: Samples per cell.
        depth_cap: Maximal number of refinement levels.
        max_boxes: Maximal number of live boxes.
        hull_only: Drop boxes inside the hull of the values found so far.
        t: The time.

    Returns:
        The covered range.
    """
    samples = _sample_values(f, cells, model, rng, budget, t)
    representatives: dict[tuple[float, ...], None] = {
        tuple(float(v) for v in value): None for value in extra
    }
    seeds = _seed_bounds(f, cells, t)
    low_confidence = False
    if not seeds or not all(
        np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)) for lower, upper in seeds
    ):
        if samples.shape[0] == 0:
            return EssentialRange(
                resolution=resolution,
                boxes=tuple((value, value) for value in representatives),
                representatives=tuple(representatives),
            )
        floor = samples.min(axis=0) - resolution
        ceiling = samples.max(axis=0) + resolution
        seeds = [
            (
                np.where(np.isfinite(lower), lower, floor),
                np.where(np.isfinite(upper), upper, ceiling),
            )
            for lower, upper in seeds
        ]
        seeds = seeds or [(floor, ceiling)]
        low_confidence = True
        logger.warning("Branch enclosure is unbounded, seeding the cover from samples.")
    frontier: list[Box] = []
    for seed_lower, seed_upper in seeds:
        flat = seed_upper - seed_lower <= resolution
        lower = np.where(flat, (seed_lower + seed_upper - resolution) / 2.0, seed_lower)
        upper = np.where(flat, lower + resolution, seed_upper)
        frontier.append((tuple(float(v) for v in lower), tuple(float(v) for v in upper)))
    # one seed per cell, equal images seed once
    frontier = list(dict.fromkeys(frontier))
    final: list[Box] = [(value, value) for value in representatives]
    reached = True
    for depth in range(depth_cap + 1):
        survivors = []
        hull = None
        if hull_only and representatives and f.codomain_dim <= 3:
            hull = convex.convex_hull(np.asarray(list(representatives)))
        for box in frontier:
            box_lower, box_upper = np.asarray(box[0]), np.asarray(box[1])
            inside = np.all((samples >= box_lower) & (samples <= box_upper), axis=1)
            if np.any(inside):
                representatives[tuple(float(v) for v in samples[np.argmax(inside)])] = None
            elif _box_is_empty(f, cells, box_lower, box_upper, t):
                continue
            else:
                hit = _search_box(f, cells, model, box_lower, box_upper, rng, t)
                if hit is None:
                    low_confidence = True
                else:
                    representatives[tuple(float(v) for v in hit)] = None
            if _inside_hull(hull, box_lower, box_upper):
                continue
            survivors.append(box)
        done = [box for box in survivors if max(np.subtract(box[1], box[0])) <= resolution]
        final.extend(done)
        pending = [box for box in survivors if max(np.subtract(box[1], box[0])) > resolution]
        if not pending:
            break
        if depth == depth_cap or len(pending) > max_boxes:
            logger.warning(
                "Essential range cover stopped at depth %s with %s boxes above resolution %s.",
                depth,
                len(pending),
                resolution,
            )
            final.extend(pending)
            reached = False
            break
        frontier = [
            child
            for box in pending
            for child in _split(np.asarray(box[0]), np.asarray(box[1]), resolution)
        ]
        logger.debug("Cover depth %s: %s live boxes.", depth, len(frontier))
    return EssentialRange(
        resolution=resolution,
        boxes=tuple(sorted(dict.fromkeys(final))),
        representatives=tuple(sorted(representatives)),
        resolution_reached=reached,
        low_confidence=low_confidence,
    )


def _search_box(  # pylint: disable=too-many-arguments
    f: PiecewiseMap,
    cells: list[tuple[CellId, Region]],
    model: MeasureModel,
    lower: FloatArray,
    upper: FloatArray,
    rng: np.random.Generator,
    t: float,
) -> FloatArray | None:
    """Zoom search for a value inside a codomain box.

    Args:
        f: The map.
        cells: The relevant cells with their regions.
        model: The measure model.
        lower: The box lower corner.
        upper: The box upper corner.
        rng: The generator.
        t: The time.

    Returns:
        A value inside the box, or None.
    """

    def accept(values: FloatArray) -> BoolArray:
        """Values inside the closed box.

        Args:
            values: Values of shape (N, n).

        Returns:
            Mask.
        """
        return np.all((values >= lower) & (values <= upper), axis=1)

    def score(values: FloatArray) -> FloatArray:
        """Distance to the box.

        Args:
            values: Values of shape (N, n).

        Returns:
            Distances.
        """
        outside = np.maximum(lower - values, 0.0) + np.maximum(values - upper, 0.0)
        return np.linalg.norm(outside, axis=1)

    for cell, cell_region in cells:
        hit = _zoom(f, cell, cell_region, model, accept, score, rng, t)
        if hit is not None:
            return hit.value
    return None


def _dedupe(values: Sequence[Sequence[float]]) -> tuple[tuple[float, ...], ...]:
    """Sorted distinct value tuples.

    Args:
        values: The values.

    Returns:
        The distinct values in lexicographic order.
    """
    return tuple(sorted({tuple(float(v) for v in value) for value in values}))


def essential_range(  # pylint: disable=too-many-arguments,too-many-locals
    f: PiecewiseMap,
    q: Region,
    ideal: NegligibilityIdeal = LEBESGUE,
    model: MeasureModel | None = None,
    resolution: float = RANGE_DEFAULTS.resolution,
    seed: int = 0,
    budget: int = RANGE_DEFAULTS.budget,
    depth_cap: int = RANGE_DEFAULTS.depth_cap,
    max_boxes: int = RANGE_DEFAULTS.max_boxes,
    hull_only: bool = False,
    t: float = 0.0,
) -> EssentialRange:
    """Compute the essential range of a map restricted to a region.

    Args:
        f: The map.
        q: The region.
        ideal: The negligibility ideal.
        model: The measure model, Lebesgue on the domain if None.
        resolution: The codomain box width of covered ranges.
        seed: The run seed.
        budget: Samples per cell.
        depth_cap: Maximal number of refinement levels.
        max_boxes: Maximal number of live boxes.
        hull_only: Only refine boxes that can change the convex hull.
        t: The time.

    Raises:
        ResolutionError: If the resolution is not positive.

    Returns:
        The exact value set when every relevant branch is constant, a box cover otherwise.
    """
    if not resolution > 0:
        raise ResolutionError(f"Resolution must be positive, got {resolution}")
    model = _effective_model(model, f, ideal)
    cells = _relevant_cells(f, q, model, t)
    extra = _large_override_values(f, q, ideal)
    constants = [f.constant_branch(cell) for cell, _ in cells]
    if all(value is not None for value in constants):
        classes = [
            classify_value(f, q, value, ideal, model, seed=seed, budget=budget, t=t)
            for value in _dedupe([value for value in constants if value is not None])
        ]
        good = [item.value for item in classes if item.verdict == Verdict.GOOD]
        logger.info("Exact essential range with %s values.", len(good) + len(extra))
        return EssentialRange(
            resolution=resolution,
            values=_dedupe(good + extra),
            low_confidence=any(item.low_confidence for item in classes),
        )
    rng = sampling.generator(seed, COVER_STREAM)
    result = _cover(
        f, cells, model, extra, resolution, rng, budget, depth_cap, max_boxes, hull_only, t
    )
    logger.info(
        "Covered essential range with %s boxes at resolution %s.", len(result.boxes), resolution
    )
    return result


def bad_values(
    f: PiecewiseMap,
    q: Region,
    ideal: NegligibilityIdeal = LEBESGUE,
    model: MeasureModel | None = None,
    seed: int = 0,
    t: float = 0.0,
) -> list[PointClass]:
    """Classify every candidate value: constant branch values and override values.

    Args:
        f: The map.
        q: The region.
        ideal: The negligibility ideal.
        model: The measure model.
        seed: The run seed.
        t: The time.

    Returns:
        One verdict per distinct candidate, in lexicographic order of the value.
    """
    candidates = [f.constant_branch(cell) for cell in f.owned_cells]
    candidates += [override.value for override in f.overrides]
    return [
        classify_value(f, q, value, ideal, model, seed=seed, t=t)
        for value in _dedupe([value for value in candidates if value is not None])
    ]


def canonical_null_set(
    f: PiecewiseMap,
    q: Region,
    ideal: NegligibilityIdeal = LEBESGUE,
    model: MeasureModel | None = None,
) -> CanonicalNullSet:
    """Switching surfaces and override sets meeting a region, negligible under the ideal.

    Args:
        f: The map.
        q: The region.
        ideal: The negligibility ideal.
        model: The measure model; a support region is recorded as removed complement.

    Returns:
        The canonical null set.
    """
    generators = [
        generator_
        for generator_ in (*f.surfaces.generators, *f.override_set.generators)
        if _meets(generator_, q) and ideal.covers(generator_)
    ]
    support = None
    if model is not None and ideal.kind == IdealKind.LEBESGUE_NULL:
        support = model.support
    return CanonicalNullSet(
        components=NullSet(generators=tuple(dict.fromkeys(generators))),
        region=q,
        outside_support=support,
    )


def _contained(sub: Region, q: Region) -> bool:
    """Whether sub lies in q up to a null set, proven symbolically.

    Args:
        sub: The candidate subregion.
        q: The parent region.

    Returns:
        True if sub minus q is provably empty.
    """
    if not q.base.contains_box(sub.base):
        return False
    if q.is_whole:
        return True
    complement = Region(
        base=sub.base,
        cells=tuple(
            tuple(Constraint(c.expr, "<" if c.sign == ">" else ">") for c in choice)
            for choice in itertools.product(*q.cells)
        ),
    )
    return is_provably_empty(region_intersect(sub, complement))


def restrict_and_compare(  # pylint: disable=too-many-arguments
    f: PiecewiseMap,
    q: Region,
    sub: Region,
    ideal: NegligibilityIdeal = LEBESGUE,
    model: MeasureModel | None = None,
    resolution: float = RANGE_DEFAULTS.resolution,
    seed: int = 0,
) -> RestrictionReport:
    """Compare the essential range and canonical null set of a restriction with the parent.

    Args:
        f: The map.
        q: The parent region.
        sub: The subregion.
        ideal: The negligibility ideal.
        model: The measure model.
        resolution: The codomain resolution of covered ranges.
        seed: The run seed.

    Raises:
        RegionContainmentError: If sub is not provably contained in q.

    Returns:
        The comparison report.
    """
    if not _contained(sub, q):
        raise RegionContainmentError("Subregion is not contained in the parent region")
    parent = essential_range(f, q, ideal, model, resolution, seed=seed)
    restricted = essential_range(f, sub, ideal, model, resolution, seed=seed)
    tol = EXACT_TOLERANCE if parent.is_exact and restricted.is_exact else 2.0 * resolution
    deviation = restricted.directed_distance(parent)
    parent_null = canonical_null_set(f, q, ideal, model).components
    sub_null = canonical_null_set(f, sub, ideal, model).components
    null_contained = all(
        generator_ in sub_null.generators
        for generator_ in parent_null.generators
        if _meets(generator_, sub)
    )
    return RestrictionReport(
        restricted=restricted,
        parent=parent,
        range_contained=deviation <= tol,
        null_contained=null_contained,
        deviation=deviation,
    )


def closure_image_minus_null(  # pylint: disable=too-many-arguments
    f: PiecewiseMap,
    q: Region,
    n: NullSet | CanonicalNullSet,
    ideal: NegligibilityIdeal = LEBESGUE,
    model: MeasureModel | None = None,
    resolution: float = RANGE_DEFAULTS.resolution,
    seed: int = 0,
    t: float = 0.0,
) -> EssentialRange:
    """Cover the closure of the raw image of q with a negligible set removed.

    Args:
        f: The map.
        q: The region.
        n: The removed set; a canonical null set also removes the complement of its support.
        ideal: The ideal n must be negligible under.
        model: The measure model used for the negligibility check.
        resolution: The codomain box width of covered images.
        seed: The run seed.
        t: The time.

    Raises:
        NotNegligibleError: If n is not negligible.
        ResolutionError: If the resolution is not positive.

    Returns:
        The exact value set or box cover of the closure of f(q minus n).
    """
    if not resolution > 0:
        raise ResolutionError(f"Resolution must be positive, got {resolution}")
    model = model or MeasureModel(base=f.domain)
    removed = n.components if isinstance(n, CanonicalNullSet) else n
    if not is_negligible(removed, ideal, model):
        raise NotNegligibleError("The removed set is not negligible under the ideal")
    if isinstance(n, CanonicalNullSet) and n.outside_support is not None:
        q = region_intersect(q, n.outside_support)
    lebesgue = MeasureModel(base=model.base)
    cells = _relevant_cells(f, q, lebesgue, t)
    removal = NegligibilityIdeal(kind=IdealKind.GENERATED, generators=removed.generators)
    kept = [
        override.value
        for override in f.overrides
        if any(
            not removal.covers(generator_) and _meets(generator_, q)
            for generator_ in override.where.generators
        )
    ]
    constants = [f.constant_branch(cell) for cell, _ in cells]
    if all(value is not None for value in constants):
        return EssentialRange(
            resolution=resolution,
            values=_dedupe([value for value in constants if value is not None] + kept),
        )
    rng = sampling.generator(seed, COVER_STREAM)
    return _cover(
        f,
        cells,
        lebesgue,
        kept,
        resolution,
        rng,
        RANGE_DEFAULTS.budget,
        RANGE_DEFAULTS.depth_cap,
        RANGE_DEFAULTS.max_boxes,
        False,
        t,
    )
