# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module containing error definitions."""

from typing import Any, Sequence


class FilippovToolkitError(Exception):
    """Represents an error with any toolkit related computations."""


class DimensionMismatchError(FilippovToolkitError):
    """Represents an error with vectors or regions of incompatible dimensions."""


class ExpressionError(FilippovToolkitError):
    """Represents an error while parsing or evaluating an expression."""


class ExpressionSyntaxError(ExpressionError):
    """Represents a malformed expression text.

    Attributes:
        position: The zero based character offset of the offending token.
        expected: The tokens that would have been accepted at the position.
    """

    def __init__(self, message: str, position: int, expected: Sequence[str] = ()):
        """Initialize the syntax error.

        Args:
            message: The error description.
            position: The zero based character offset of the offending token.
            expected: The tokens that would have been accepted at the position.
        """
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.expected = tuple(expected)


class UnknownIdentifierError(ExpressionError):
    """Represents an identifier that is neither a variable nor a known function."""


class VariableOutOfRangeError(ExpressionError):
    """Represents a variable index larger than the declared dimension."""


class ExpressionDomainError(ExpressionError):
    """Represents a non finite evaluation result (log of nonpositive, division by zero)."""


class NonDifferentiablePointError(ExpressionError):
    """Represents a gradient request on a kink of abs, min or max."""


class RegionError(FilippovToolkitError):
    """Represents an error with domain boxes, regions or null sets."""


class InvalidBoxError(RegionError):
    """Represents a box with empty interior or non finite bounds."""


class SampleBudgetError(RegionError):
    """Represents a Monte Carlo budget below the supported minimum."""


class NegativeDensityError(RegionError):
    """Represents a measure density that takes negative values on its base."""


class IrregularSurfaceError(RegionError):
    """Represents a surface expression with a vanishing gradient on its zero set."""


class PiecewiseMapError(FilippovToolkitError):
    """Represents an error with a piecewise map definition or query."""


class OutsideDomainError(PiecewiseMapError):
    """Represents a query point outside of the map domain."""


class UncoveredCellError(PiecewiseMapError):
    """Represents a positive measure cell that owns no branch.

    Attributes:
        cell: The sign vector key of the uncovered cell.
    """

    def __init__(self, cell: str):
        """Initialize the coverage error.

        Args:
            cell: The sign vector key of the uncovered cell.
        """
        super().__init__(f"No branch for positive measure cell {cell!r}")
        self.cell = cell


class BranchDomainError(PiecewiseMapError):
    """Represents a branch that is undefined on parts of its cell."""


class EssentialRangeError(FilippovToolkitError):
    """Represents an error while classifying values or computing essential ranges."""


class ResolutionError(EssentialRangeError):
    """Represents a nonpositive codomain resolution."""


class NotNegligibleError(EssentialRangeError):
    """Represents a set that was required to be negligible but is not."""


class RegionContainmentError(EssentialRangeError):
    """Represents a subregion that is not contained in its parent region."""


class ConvexificationError(FilippovToolkitError):
    """Represents an error while building hulls or Filippov sets."""


class EmptyHullInputError(ConvexificationError):
    """Represents a hull request without points."""


class ScheduleExhaustedError(ConvexificationError):
    """Represents a radius schedule that ended before the hulls converged.

    Attributes:
        last_hulls: The last two hulls computed along the schedule.
    """

    def __init__(self, message: str, last_hulls: tuple[Any, Any]):
        """Initialize the schedule error.

        Args:
            message: The error description.
            last_hulls: The last two hulls computed along the schedule.
        """
        super().__init__(message)
        self.last_hulls = last_hulls


class SolverError(FilippovToolkitError):
    """Represents an error while integrating a differential inclusion."""


class InvalidProblemError(SolverError):
    """Represents an initial value problem with an invalid state, horizon or bound."""


class StepSizeUnderflowError(SolverError):
    """Represents a step size that fell below the representable minimum."""


class EventAccumulationError(SolverError):
    """Represents too many switching events (Zeno behaviour).

    Attributes:
        time: The time of the last handled event.
        state: The state at the last handled event.
    """

    def __init__(self, message: str, time: float, state: Sequence[float]):
        """Initialize the event accumulation error.

        Args:
            message: The error description.
            time: The time of the last handled event.
            state: The state at the last handled event.
        """
        super().__init__(message)
        self.time = time
        self.state = tuple(state)


class DegenerateNormalError(SolverError):
    """Represents a switching surface normal that vanishes at the event point."""


class ProblemFileError(FilippovToolkitError):
    """Represents an invalid problem file.

    Attributes:
        field: The dotted path of the offending field.
        line: The one based line number of the field, if known.
    """

    def __init__(self, message: str, field: str = "", line: int | None = None):
        """Initialize the problem file error.

        Args:
            message: The error description.
            field: The dotted path of the offending field.
            line: The one based line number of the field, if known.
        """
        location = f" (field {field!r}" if field else ""
        if location:
            location += f", line {line})" if line is not None else ")"
        super().__init__(f"{message}{location}")
        self.field = field
        self.line = line


class FileAccessError(FilippovToolkitError):
    """Represents a problem, trajectory or output file that cannot be read or written."""
