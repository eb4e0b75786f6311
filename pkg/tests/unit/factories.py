# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Factories for generating test data."""

from typing import Generic, Mapping, Sequence, TypeVar

import factory

from filippov_toolkit import expr
from filippov_toolkit.piecewise import CellId, PiecewiseMap
from filippov_toolkit.region import DomainBox
from filippov_toolkit.solver import IVProblem

T = TypeVar("T")


# DC060: Docstrings have been abbreviated for factories, checking for docstrings on model
# attributes can be skipped.


class BaseMetaFactory(Generic[T], factory.base.FactoryMetaClass):
    """Used for type hints of factories."""

    # No need for docstring because it is used for type hints
    def __call__(cls, *args, **kwargs) -> T:  # noqa: N805
        """Used for type hints of factories."""  # noqa: DCO020
        return super().__call__(*args, **kwargs)  # noqa: DCO030


def _branches(
    texts: Mapping[str, Sequence[str]], dim: int
) -> dict[CellId, tuple[expr.Expr, ...]]:
    """Parse branch expression texts keyed by sign strings.

    Args:
        texts: Branch component texts keyed by the cell signs.
        dim: The state dimension.

    Returns:
        The branches keyed by cell.
    """
    return {
        CellId(signs): tuple(expr.parse(text, dim) for text in components)
        for signs, components in texts.items()
    }


class PiecewiseMapFactory(factory.Factory, metaclass=BaseMetaFactory[PiecewiseMap]):
    """Piecewise map parsed from texts, the sign map by default."""  # noqa: DCO060

    class Meta:  # pylint: disable=too-few-public-methods
        """Configuration for factory."""  # noqa: DCO060

        model = PiecewiseMap

    class Params:  # pylint: disable=too-few-public-methods
        """Texts the map is parsed from."""  # noqa: DCO060

        dim = 1
        lower = (-2.0,)
        upper = (2.0,)
        switch_texts = ("x1",)
        branch_texts = {"+": ("-1",), "-": ("1",)}

    domain = factory.LazyAttribute(lambda o: DomainBox.of(o.lower, o.upper))
    codomain_dim = factory.LazyAttribute(lambda o: len(next(iter(o.branch_texts.values()))))
    switches = factory.LazyAttribute(
        lambda o: tuple(expr.parse(text, o.dim) for text in o.switch_texts)
    )
    branches = factory.LazyAttribute(lambda o: _branches(o.branch_texts, o.dim))


class DryFrictionMapFactory(PiecewiseMapFactory):
    """Dry friction with a constant push, v' = -sign(v) + 0.5."""  # noqa: DCO060

    class Params:  # pylint: disable=too-few-public-methods
        """Texts the map is parsed from."""  # noqa: DCO060

        lower = (-4.0,)
        upper = (4.0,)
        branch_texts = {"+": ("-0.5",), "-": ("1.5",)}


class RelayOscillatorMapFactory(PiecewiseMapFactory):
    """Relay oscillator x1' = x2, x2' = -sign(x1)."""  # noqa: DCO060

    class Params:  # pylint: disable=too-few-public-methods
        """Texts the map is parsed from."""  # noqa: DCO060

        dim = 2
        lower = (-3.0, -3.0)
        upper = (3.0, 3.0)
        branch_texts = {"+": ("x2", "-1"), "-": ("x2", "1")}


class QuadrantMapFactory(PiecewiseMapFactory):
    """Constant values on the four quadrants of the plane."""  # noqa: DCO060

    class Params:  # pylint: disable=too-few-public-methods
        """Texts the map is parsed from."""  # noqa: DCO060

        dim = 2
        lower = (-1.0, -1.0)
        upper = (1.0, 1.0)
        switch_texts = ("x1", "x2")
        branch_texts = {
            "++": ("-1", "-1"),
            "+-": ("-1", "1"),
            "-+": ("1", "-1"),
            "--": ("1", "1"),
        }


class SmoothMapFactory(PiecewiseMapFactory):
    """Map without switching surfaces, x' = -x."""  # noqa: DCO060

    class Params:  # pylint: disable=too-few-public-methods
        """Texts the map is parsed from."""  # noqa: DCO060

        switch_texts = ()
        branch_texts = {"": ("-x1",)}


class AffineMapFactory(PiecewiseMapFactory):
    """Scalar map f(x) = x1 on [-1, 1], one cell."""  # noqa: DCO060

    class Params:  # pylint: disable=too-few-public-methods
        """Texts the map is parsed from."""  # noqa: DCO060

        lower = (-1.0,)
        upper = (1.0,)
        switch_texts = ()
        branch_texts = {"": ("x1",)}


class IVProblemFactory(factory.Factory, metaclass=BaseMetaFactory[IVProblem]):
    """Sign map started at 1 over [0, 2]."""  # noqa: DCO060

    class Meta:  # pylint: disable=too-few-public-methods
        """Configuration for factory."""  # noqa: DCO060

        model = IVProblem

    rhs = factory.SubFactory(PiecewiseMapFactory)
    x0 = (1.0,)
    horizon = 2.0
