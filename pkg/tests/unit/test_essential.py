# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Unit tests for essential module."""

import math

import numpy as np
import pytest

from filippov_toolkit import essential, expr
from filippov_toolkit.config import IdealKind
from filippov_toolkit.errors import (
    DimensionMismatchError,
    NotNegligibleError,
    RegionContainmentError,
    ResolutionError,
)
from filippov_toolkit.essential import EssentialRange, Verdict
from filippov_toolkit.piecewise import Override
from filippov_toolkit.region import (
    Constraint,
    DomainBox,
    MeasureModel,
    NegligibilityIdeal,
    NullSet,
    PointList,
    Region,
    SurfaceGenerator,
)
from tests.unit.factories import (
    AffineMapFactory,
    PiecewiseMapFactory,
    RelayOscillatorMapFactory,
)

ORIGIN = PointList(((0.0,),))
NO_GENERATORS = NegligibilityIdeal(kind=IdealKind.GENERATED, generators=())


def _half_line(base: DomainBox, text: str = "x1") -> Region:
    """The region text > 0 of a one dimensional box.

    Args:
        base: The base box.
        text: The expression text.

    Returns:
        The region.
    """
    return Region.where(base, (Constraint(expr.parse(text, 1), ">"),))


def _sign_map_with_spike():
    """The sign map with the value 7 forced at the origin.

    Returns:
        The map.
    """
    return PiecewiseMapFactory().with_override(Override(NullSet((ORIGIN,)), (7.0,)))


def test_radius_schedule():
    """
    arrange: given the default schedule parameters.
    act: when the radius schedule is built.
    assert: twenty radii halve from 1.
    """
    radii = essential.radius_schedule()

    assert len(radii) == 20
    assert radii[0] == 1.0
    assert radii[-1] == pytest.approx(2.0**-19)


def test_essential_range_exact_values():
    """
    arrange: given the sign map with a forced value at the origin.
    act: when the essential range over the domain is computed under Lebesgue null sets.
    assert: only the two branch values are returned, exactly.
    """
    rhs = _sign_map_with_spike()

    result = essential.essential_range(rhs, Region.whole(rhs.domain))

    assert result.is_exact
    assert result.values == ((-1.0,), (1.0,))
    assert not result.low_confidence


def test_essential_range_generated_ideal_keeps_override():
    """
    arrange: given the sign map with a forced value and an ideal that does not list the origin.
    act: when the essential range is computed.
    assert: the forced value is part of the range.
    """
    rhs = _sign_map_with_spike()

    result = essential.essential_range(rhs, Region.whole(rhs.domain), ideal=NO_GENERATORS)

    assert result.values == ((-1.0,), (1.0,), (7.0,))


def test_essential_range_restricted_region():
    """
    arrange: given the sign map and the region x1 > 1.
    act: when the essential range is computed.
    assert: only the value of the positive cell remains.
    """
    rhs = PiecewiseMapFactory()

    result = essential.essential_range(rhs, _half_line(rhs.domain, "x1 - 1"))

    assert result.values == ((-1.0,),)


def test_essential_range_cover_of_supported_identity():
    """
    arrange: given the identity on [-1, 1] and a measure supported on x1 > 0.
    act: when the essential range is covered at resolution 0.01.
    assert: the cover matches [0, 1] within the resolution.
    """
    rhs = AffineMapFactory()
    model = MeasureModel(base=rhs.domain, support=_half_line(rhs.domain))

    cover = essential.essential_range(
        rhs, Region.whole(rhs.domain), model=model, resolution=0.01, seed=5
    )

    reference = EssentialRange(resolution=0.01, boxes=(((0.0,), (1.0,)),))
    assert not cover.is_exact
    assert cover.resolution_reached
    assert cover.hausdorff(reference) <= 0.01
    assert float(cover.points().min()) >= 0.0


def test_essential_range_cover_of_separated_cells():
    """
    arrange: given the relay oscillator, whose cells map to the lines x2 = -1 and x2 = 1.
    act: when the essential range is covered at resolution 0.05.
    assert: every box hugs one of the two segments and the gap between them stays uncovered.
    """
    rhs = RelayOscillatorMapFactory()

    cover = essential.essential_range(rhs, Region.whole(rhs.domain), resolution=0.05, seed=3)

    reference = EssentialRange(
        resolution=0.05, boxes=(((-3.0, -1.0), (3.0, -1.0)), ((-3.0, 1.0), (3.0, 1.0)))
    )
    boxes = cover.as_boxes()
    assert cover.resolution_reached
    assert np.all(np.abs(np.abs(boxes[:, :, 1]) - 1.0) <= 0.05)
    assert cover.hausdorff(reference) <= 0.1


def test_essential_range_invalid_resolution():
    """
    arrange: given the sign map.
    act: when the essential range is requested at resolution 0.
    assert: ResolutionError is raised.
    """
    rhs = PiecewiseMapFactory()

    with pytest.raises(ResolutionError):
        essential.essential_range(rhs, Region.whole(rhs.domain), resolution=0.0)


def test_classify_value_wrong_dimension():
    """
    arrange: given the scalar sign map.
    act: when a two dimensional value is classified.
    assert: DimensionMismatchError is raised.
    """
    rhs = PiecewiseMapFactory()

    with pytest.raises(DimensionMismatchError):
        essential.classify_value(rhs, Region.whole(rhs.domain), (1.0, 2.0))


def test_classify_value_good_and_bad():
    """
    arrange: given the sign map.
    act: when a branch value and a value far from both branches are classified.
    assert: the branch value is good with a positive volume bound and the other is bad.
    """
    rhs = PiecewiseMapFactory()
    whole = Region.whole(rhs.domain)

    good = essential.classify_value(rhs, whole, (1.0,))
    bad = essential.classify_value(rhs, whole, (0.0,))

    assert good.verdict == Verdict.GOOD
    assert good.measure_lower_bound > 0.0
    assert not good.low_confidence
    assert bad.verdict == Verdict.BAD
    assert bad.radius == 1.0


def test_bad_values_lists_null_override():
    """
    arrange: given the sign map with a forced value on a Lebesgue null set.
    act: when every candidate value is classified.
    assert: the branch values are good and the forced value is bad.
    """
    rhs = _sign_map_with_spike()

    classes = essential.bad_values(rhs, Region.whole(rhs.domain))

    assert [(item.value, item.verdict) for item in classes] == [
        ((-1.0,), Verdict.GOOD),
        ((1.0,), Verdict.GOOD),
        ((7.0,), Verdict.BAD),
    ]


def test_bad_values_generated_ideal():
    """
    arrange: given the sign map with a forced value and an ideal that does not list the origin.
    act: when the forced value is classified.
    assert: it is good with an unbounded measure witness.
    """
    rhs = _sign_map_with_spike()

    classes = essential.bad_values(rhs, Region.whole(rhs.domain), ideal=NO_GENERATORS)

    assert classes[-1].verdict == Verdict.GOOD
    assert math.isinf(classes[-1].measure_lower_bound)


def test_canonical_null_set():
    """
    arrange: given the sign map with a forced value and a measure with a support region.
    act: when the canonical null set is built.
    assert: it holds the switching surface and the override set and records the support.
    """
    rhs = _sign_map_with_spike()
    support = _half_line(rhs.domain)
    model = MeasureModel(base=rhs.domain, support=support)

    null_set = essential.canonical_null_set(rhs, Region.whole(rhs.domain), model=model)

    assert null_set.components.generators == (SurfaceGenerator(rhs.switches[0]), ORIGIN)
    assert null_set.outside_support == support


def test_canonical_null_set_skips_missed_generators():
    """
    arrange: given the sign map with a forced value and the region x1 > 1.
    act: when the canonical null set is built.
    assert: neither the surface nor the origin meets the region.
    """
    rhs = _sign_map_with_spike()

    null_set = essential.canonical_null_set(rhs, _half_line(rhs.domain, "x1 - 1"))

    assert null_set.components.is_empty


def test_restrict_and_compare():
    """
    arrange: given the sign map and the subregion x1 > 1.
    act: when the restriction is compared with the whole domain.
    assert: both the range and the null set of the restriction are contained in the parent.
    """
    rhs = PiecewiseMapFactory()

    report = essential.restrict_and_compare(
        rhs, Region.whole(rhs.domain), _half_line(rhs.domain, "x1 - 1")
    )

    assert report.restricted.values == ((-1.0,),)
    assert report.parent.values == ((-1.0,), (1.0,))
    assert report.range_contained
    assert report.null_contained
    assert report.deviation == 0.0


@pytest.mark.parametrize(
    "parent, sub",
    [
        pytest.param(
            Region.whole(DomainBox.of((-2.0,), (2.0,))),
            Region.whole(DomainBox.of((-3.0,), (3.0,))),
            id="larger box",
        ),
        pytest.param(
            _half_line(DomainBox.of((-2.0,), (2.0,))),
            Region.whole(DomainBox.of((-2.0,), (2.0,))),
            id="outside the constraint",
        ),
    ],
)
def test_restrict_and_compare_not_contained(parent: Region, sub: Region):
    """
    arrange: given subregions that leave the parent region.
    act: when the restriction is compared.
    assert: RegionContainmentError is raised.
    """
    with pytest.raises(RegionContainmentError):
        essential.restrict_and_compare(PiecewiseMapFactory(), parent, sub)


@pytest.mark.parametrize(
    "removed, expected",
    [
        pytest.param(NullSet((ORIGIN,)), ((-1.0,), (1.0,)), id="origin removed"),
        pytest.param(NullSet(()), ((-1.0,), (1.0,), (7.0,)), id="nothing removed"),
    ],
)
def test_closure_image_minus_null(removed: NullSet, expected: tuple[tuple[float, ...], ...]):
    """
    arrange: given the sign map with a forced value at the origin.
    act: when the closure of the image is taken with a null set removed.
    assert: the forced value only survives when the origin is kept.
    """
    rhs = _sign_map_with_spike()

    result = essential.closure_image_minus_null(rhs, Region.whole(rhs.domain), removed)

    assert result.values == expected


def test_closure_image_minus_canonical_null_set_matches_range():
    """
    arrange: given the sign map with a forced value and its canonical null set.
    act: when the closure of the image minus that set is taken.
    assert: it equals the essential range.
    """
    rhs = _sign_map_with_spike()
    whole = Region.whole(rhs.domain)

    closure = essential.closure_image_minus_null(
        rhs, whole, essential.canonical_null_set(rhs, whole)
    )

    assert closure.values == essential.essential_range(rhs, whole).values


def test_closure_image_minus_null_not_negligible():
    """
    arrange: given an ideal that lists no generators.
    act: when a point is removed from the image.
    assert: NotNegligibleError is raised.
    """
    rhs = _sign_map_with_spike()

    with pytest.raises(NotNegligibleError):
        essential.closure_image_minus_null(
            rhs, Region.whole(rhs.domain), NullSet((ORIGIN,)), ideal=NO_GENERATORS
        )


def test_directed_distance_of_exact_ranges():
    """
    arrange: given the exact ranges {0} and {0, 3}.
    act: when directed distances are computed.
    assert: the smaller range is inside the larger one but not conversely.
    """
    small = EssentialRange(resolution=0.1, values=((0.0,),))
    large = EssentialRange(resolution=0.1, values=((0.0,), (3.0,)))

    assert small.directed_distance(large) == 0.0
    assert large.directed_distance(small) == 3.0
    assert small.contains_within(large, 0.0)
    np.testing.assert_array_equal(large.points(), [[0.0], [3.0]])
