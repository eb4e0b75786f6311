# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for the Dormand-Prince 5(4) stepper with cubic Hermite dense output."""

import dataclasses
import logging
import math
from typing import Callable

import numpy as np

from filippov_toolkit.config import SOLVER_DEFAULTS
from filippov_toolkit.errors import ExpressionDomainError, StepSizeUnderflowError
from filippov_toolkit.expr import FloatArray

logger = logging.getLogger(__name__)

VectorField = Callable[[float, FloatArray], FloatArray]

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the fifth and the embedded fourth order weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
MAX_REJECTIONS = 200


@dataclasses.dataclass(frozen=True, eq=False)
class HermiteSegment:
    """Cubic Hermite interpolant between two accepted states.

    Attributes:
        t0: The start time.
        t1: The end time.
        x0: The start state.
        x1: The end state.
        dx0: The derivative at the start.
        dx1: The derivative at the end.
    """

    t0: float
    t1: float
    x0: FloatArray
    x1: FloatArray
    dx0: FloatArray
    dx1: FloatArray

    @property
    def width(self) -> float:
        """The time span."""
        return self.t1 - self.t0

    def state(self, t: float) -> FloatArray:
        """Interpolated state.

        Args:
            t: A time in [t0, t1].

        Returns:
            The state.
        """
        width = self.width
        s = (t - self.t0) / width
        h00 = (2.0 * s - 3.0) * s * s + 1.0
        h10 = ((s - 2.0) * s + 1.0) * s
        h01 = (3.0 - 2.0 * s) * s * s
        h11 = (s - 1.0) * s * s
        return h00 * self.x0 + h10 * width * self.dx0 + h01 * self.x1 + h11 * width * self.dx1

    def derivative(self, t: float) -> FloatArray:
        """Derivative of the interpolant.

        Args:
            t: A time in [t0, t1].

        Returns:
            The time derivative.
        """
        width = self.width
        s = (t - self.t0) / width
        d00 = 6.0 * s * (s - 1.0)
        d10 = (3.0 * s - 4.0) * s + 1.0
        d11 = (3.0 * s - 2.0) * s
        return (d00 * (self.x0 - self.x1)) / width + d10 * self.dx0 + d11 * self.dx1

    def restrict(self, end: float, x_end: FloatArray | None = None) -> "HermiteSegment":
        """The same cubic on [t0, end].

        Args:
            end: The new end time.
            x_end: Replacement end state, the interpolated state if None.

        Returns:
            The shortened segment.
        """
        return HermiteSegment(
            t0=self.t0,
            t1=end,
            x0=self.x0,
            x1=self.state(end) if x_end is None else x_end,
            dx0=self.dx0,
            dx1=self.derivative(end),
        )

    def with_end_state(self, x_end: FloatArray) -> "HermiteSegment":
        """Copy ending at another state.

        Args:
            x_end: The end state.

        Returns:
            The modified segment.
        """
        return dataclasses.replace(self, x1=x_end)


@dataclasses.dataclass(frozen=True, eq=False)
class Step:
    """Accepted step.

    Attributes:
        segment: Dense output over the step.
        next_step: Proposed size of the following step.
        error: Scaled local error estimate, at most 1.
        rejected: Number of rejected attempts before acceptance.
    """

    segment: HermiteSegment
    next_step: float
    error: float
    rejected: int


class DormandPrince:
    """Adaptive explicit Runge-Kutta pair of orders 5 and 4.

    Attributes:
        rtol: Relative local error tolerance.
        atol: Absolute local error tolerance.
        max_step: Upper bound of step sizes.
    """

    def __init__(
        self,
        rtol: float = SOLVER_DEFAULTS.rtol,
        atol: float = SOLVER_DEFAULTS.atol,
        max_step: float = math.inf,
    ):
        """Initialize the stepper.

        Args:
            rtol: Relative local error tolerance.
            atol: Absolute local error tolerance.
            max_step: Upper bound of step sizes.

        Raises:
            ValueError: If a tolerance is not positive.
        """
        if not (rtol > 0.0 and atol > 0.0 and max_step > 0.0):
            raise ValueError("Tolerances and the maximal step must be positive")
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step

    def _scale(self, x: FloatArray, x_new: FloatArray) -> FloatArray:
        """Componentwise error scale.

        Args:
            x: The old state.
            x_new: The new state.

        Returns:
            atol + rtol max(|x|, |x_new|).
        """
        return self.atol + self.rtol * np.maximum(np.abs(x), np.abs(x_new))

    def attempt(
        self, field: VectorField, t: float, x: FloatArray, fx: FloatArray, h: float
    ) -> tuple[FloatArray, FloatArray, float]:
        """Take one trial step.

        Args:
            field: The vector field.
            t: The time.
            x: The state.
            fx: The field at (t, x).
            h: The step size.

        Returns:
            The new state, the field there and the scaled error norm.
        """
        stages = [fx]
        for row, node in zip(_A[1:], _C[1:]):
            increment = sum(weight * stage for weight, stage in zip(row, stages))
            stages.append(field(t + node * h, x + h * increment))
        k = np.stack(stages)
        x_new = x + h * (_B @ k)
        error = h * (_E @ k)
        norm = float(np.sqrt(np.mean((error / self._scale(x, x_new)) ** 2)))
        return x_new, stages[-1], norm

    def initial_step(
        self, field: VectorField, t: float, x: FloatArray, fx: FloatArray, span: float
    ) -> float:
        """Starting step size from the scales of the state and its derivatives.

        Args:
            field: The vector field.
            t: The time.
            x: The state.
            fx: The field at (t, x).
            span: The remaining time.

        Returns:
            The proposed step size.
        """
        scale = self.atol + self.rtol * np.abs(x)
        d0 = float(np.sqrt(np.mean((x / scale) ** 2)))
        d1 = float(np.sqrt(np.mean((fx / scale) ** 2)))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
        f1 = field(t + h0, x + h0 * fx)
        d2 = float(np.sqrt(np.mean(((f1 - fx) / scale) ** 2))) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
        return min(100.0 * h0, h1, span, self.max_step)

    def step(
        self, field: VectorField, t: float, x: FloatArray, fx: FloatArray, h: float
    ) -> Step:
        """Take one accepted step, shrinking the size until the error is within tolerance.

        Args:
            field: The vector field.
            t: The time.
            x: The state.
            fx: The field at (t, x).
            h: The first trial size.

        Raises:
            StepSizeUnderflowError: If the step size underflows.
            ExpressionDomainError: If the field stays undefined while shrinking.

        Returns:
            The accepted step.
        """
        h = min(h, self.max_step)
        minimum = 16.0 * np.finfo(np.float64).eps * max(abs(t), 1.0)
        for rejected in range(MAX_REJECTIONS):
            if h < minimum:
                logger.error("Step size %s underflows at t=%s.", h, t)
                raise StepSizeUnderflowError(f"Step size {h} underflows at t={t}")
            x_new, f_new, error = self.attempt(field, t, x, fx, h)
            if math.isfinite(error) and np.all(np.isfinite(x_new)) and error <= 1.0:
                factor = MAX_FACTOR if error == 0.0 else SAFETY * error ** (-1.0 / 5.0)
                segment = HermiteSegment(t0=t, t1=t + h, x0=x, x1=x_new, dx0=fx, dx1=f_new)
                return Step(
                    segment=segment,
                    next_step=h * min(MAX_FACTOR, max(MIN_FACTOR, factor)),
                    error=error,
                    rejected=rejected,
                )
            if math.isfinite(error):
                h *= max(MIN_FACTOR, SAFETY * error ** (-1.0 / 5.0))
            else:
                h *= MIN_FACTOR
            logger.debug("Rejected step at t=%s, retrying with %s.", t, h)
        raise ExpressionDomainError(f"Vector field is not finite near t={t}")
