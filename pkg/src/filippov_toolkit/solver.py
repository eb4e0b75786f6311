# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for integrating and verifying Filippov solutions of piecewise systems.

Inside a cell the branch flow is integrated with the Dormand-Prince stepper. After every accepted
step the switching values are checked for sign changes, and the event time is localized by
bisection on the dense output. At an event the surface decision selects a crossing, a sliding
mode (classical Filippov weights on one surface, least-norm hull element on intersections) or a
stop when the continuation is ambiguous.
"""

import bisect
import dataclasses
import itertools
import logging
import math
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from filippov_toolkit import convex, filippov, sampling
from filippov_toolkit.config import SOLVER_DEFAULTS, EventKind, ModeKind, StopReason
from filippov_toolkit.errors import (
    DegenerateNormalError,
    DimensionMismatchError,
    EventAccumulationError,
    ExpressionDomainError,
    InvalidProblemError,
    UncoveredCellError,
)
from filippov_toolkit.expr import FloatArray
from filippov_toolkit.filippov import FilippovMap
from filippov_toolkit.piecewise import SIGNS, CellId, PiecewiseMap
from filippov_toolkit.stepper import DormandPrince, HermiteSegment

logger = logging.getLogger(__name__)

VERIFY_STREAM = 2**60
BOUND_STREAM = 2**60 + 1
FEASIBILITY_TOLERANCE = 1e-9
PROJECTION_ITERATIONS = 5
EXCLUSION_FACTOR = 10.0


@dataclasses.dataclass(frozen=True)
class IVProblem:  # pylint: disable=too-many-instance-attributes
    """Initial value problem x' in F(t, x), x(0) = x0 on [0, horizon].

    Attributes:
        rhs: The right-hand side; its codomain dimension equals the state dimension.
        x0: The initial state.
        horizon: The final time.
        rtol: Relative local error tolerance.
        atol: Absolute local error tolerance.
        event_tolerance: Time tolerance of event localization.
        bound: Optional bound on the norm of every branch value.
        max_events: Zeno guard on the number of events.
    """

    rhs: PiecewiseMap
    x0: tuple[float, ...]
    horizon: float
    rtol: float = SOLVER_DEFAULTS.rtol
    atol: float = SOLVER_DEFAULTS.atol
    event_tolerance: float = SOLVER_DEFAULTS.event_tolerance
    bound: float | None = None
    max_events: int = SOLVER_DEFAULTS.max_events

    def __post_init__(self) -> None:
        """Validate the problem.

        Raises:
            DimensionMismatchError: If the state and codomain dimensions differ.
            InvalidProblemError: If the initial state, horizon or bound is invalid.
        """
        dim = self.rhs.domain.dim
        if self.rhs.codomain_dim != dim or len(self.x0) != dim:
            raise DimensionMismatchError(f"Initial value problem needs dimension {dim}")
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise InvalidProblemError(f"Horizon must be positive and finite, got {self.horizon}")
        point = np.asarray(self.x0, dtype=np.float64)
        domain = self.rhs.domain
        if not np.all((point > domain.lower_array) & (point < domain.upper_array)):
            raise InvalidProblemError(f"Initial state {list(self.x0)} is not interior")
        if self.bound is not None:
            self._check_bound(self.bound)

    def _check_bound(self, bound: float) -> None:
        """Sample every branch on the domain against the magnitude bound.

        Args:
            bound: The bound.

        Raises:
            InvalidProblemError: If a sampled branch value exceeds the bound.
        """
        rng = sampling.generator(0, BOUND_STREAM)
        domain = self.rhs.domain
        points = sampling.uniform_in_box(rng, domain.lower_array, domain.upper_array, 1000)
        times = rng.random(points.shape[0]) * self.horizon
        for cell in self.rhs.owned_cells:
            values = np.stack([e.evaluate_many(points, times) for e in self.rhs.branches[cell]])
            norms = np.linalg.norm(values, axis=0)
            if np.any(norms > bound):
                raise InvalidProblemError(
                    f"Branch of cell {cell} exceeds the bound {bound}: {float(norms.max())}"
                )


@dataclasses.dataclass(frozen=True)
class Mode:
    """Integration mode.

    Attributes:
        kind: Smooth, sliding or stopped.
        cells: The flowing cell, or the cells combined while sliding.
        active: Indices of the surfaces slid along.
        weights: Convex weights of the combined cells.
        reason: Why the integration stopped.
    """

    kind: ModeKind
    cells: tuple[CellId, ...] = ()
    active: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()
    reason: StopReason | None = None

    @classmethod
    def smooth(cls, cell: CellId) -> "Mode":
        """Flow of one cell.

        Args:
            cell: The cell.

        Returns:
            The mode.
        """
        return cls(kind=ModeKind.SMOOTH, cells=(cell,))

    @classmethod
    def stopped(cls, reason: StopReason) -> "Mode":
        """End of the integration.

        Args:
            reason: The reason.

        Returns:
            The mode.
        """
        return cls(kind=ModeKind.STOPPED, reason=reason)

    @property
    def label(self) -> str:
        """Compact text such as smooth(+-), sliding(1) or stopped(horizon)."""
        match self.kind:
            case ModeKind.SMOOTH:
                return f"smooth({self.cells[0]})"
            case ModeKind.SLIDING:
                return f"sliding({','.join(str(i + 1) for i in self.active)})"
            case _:
                return f"stopped({self.reason.value if self.reason else ''})"


@dataclasses.dataclass(frozen=True)
class Node:
    """Trajectory node.

    Attributes:
        t: The time.
        x: The state.
        mode: The mode from this node on.
    """

    t: float
    x: tuple[float, ...]
    mode: Mode


@dataclasses.dataclass(frozen=True)
class Event:
    """Decision taken at switching surfaces.

    Attributes:
        t: The event time.
        surfaces: Indices of the active surfaces.
        kind: The decision.
        tangential: Whether a normal velocity was within the tangency threshold.
    """

    t: float
    surfaces: tuple[int, ...]
    kind: EventKind
    tangential: bool = False


@dataclasses.dataclass(frozen=True, eq=False)
class Trajectory:
    """Absolutely continuous solution with dense output.

    Attributes:
        nodes: Accepted nodes with strictly increasing times.
        segments: Dense output between consecutive nodes.
        events: Decisions at switching surfaces.
        stop: Why the integration ended.
    """

    nodes: tuple[Node, ...]
    segments: tuple[HermiteSegment, ...]
    events: tuple[Event, ...] = ()
    stop: StopReason = StopReason.HORIZON

    @property
    def times(self) -> tuple[float, ...]:
        """Node times."""
        return tuple(node.t for node in self.nodes)

    @property
    def final(self) -> Node:
        """The last node."""
        return self.nodes[-1]

    def _segment(self, t: float) -> HermiteSegment:
        """Segment containing a time.

        Args:
            t: The time.

        Raises:
            ValueError: If the time lies outside the trajectory.

        Returns:
            The segment.
        """
        if not self.segments or not self.nodes[0].t <= t <= self.nodes[-1].t:
            raise ValueError(f"Time {t} lies outside of the trajectory")
        starts = [segment.t0 for segment in self.segments]
        index = max(bisect.bisect_right(starts, t) - 1, 0)
        return self.segments[index]

    def state(self, t: float) -> FloatArray:
        """Dense output state.

        Args:
            t: The time.

        Returns:
            The state.
        """
        return self._segment(t).state(t)

    def derivative(self, t: float) -> FloatArray:
        """Dense output derivative, right-continuous at nodes.

        Args:
            t: The time.

        Returns:
            The derivative.
        """
        return self._segment(t).derivative(t)


@dataclasses.dataclass(frozen=True)
class Decision:
    """Outcome of decide_at_surface.

    Attributes:
        kind: Crossing, sliding entry or ambiguous.
        mode: The mode to continue with.
        tangential: Whether a normal velocity was within the tangency threshold.
    """

    kind: EventKind
    mode: Mode
    tangential: bool = False


@dataclasses.dataclass(frozen=True)
class ResidualReport:
    """Inclusion residuals of a trajectory.

    Attributes:
        times: The sample times.
        violations: Support violation of the derivative at each sample.
        tolerance: The pass tolerance.
    """

    times: tuple[float, ...]
    violations: tuple[float, ...]
    tolerance: float

    @property
    def max_violation(self) -> float:
        """The largest violation, 0 without samples."""
        return max(self.violations, default=0.0)

    @property
    def passed(self) -> bool:
        """Whether the largest violation is within the tolerance."""
        return self.max_violation <= self.tolerance


def _normal(rhs: PiecewiseMap, index: int, x: FloatArray) -> FloatArray:
    """Gradient of a switching expression.

    Args:
        rhs: The map.
        index: The switch index.
        x: The point.

    Raises:
        DegenerateNormalError: If the gradient nearly vanishes.

    Returns:
        The gradient.
    """
    _, grad, _ = rhs.switches[index].gradient_many(x[None, :])
    normal = grad[0]
    if not np.linalg.norm(normal) >= SOLVER_DEFAULTS.degenerate_normal:
        raise DegenerateNormalError(
            f"Surface {rhs.switch_names[index]} has a degenerate normal at {x.tolist()}"
        )
    return normal


def _cells_around(rhs: PiecewiseMap, x: FloatArray, active: Sequence[int]) -> list[CellId]:
    """Owned cells obtained by freeing the signs of the active switches.

    Args:
        rhs: The map.
        x: The point.
        active: The active switch indices.

    Returns:
        The owned cells in lexicographic order.
    """
    values = rhs.switch_values(x[None, :])[0]
    choices = [
        SIGNS if index in active else ("+" if value > 0 else "-")
        for index, value in enumerate(values)
    ]
    cells = (CellId("".join(signs)) for signs in itertools.product(*choices))
    return sorted(cell for cell in cells if cell in rhs.branches)


def _sliding_pair(
    rhs: PiecewiseMap, x: FloatArray, index: int
) -> tuple[CellId, CellId]:
    """The cells on both sides of one surface.

    Args:
        rhs: The map.
        x: The point.
        index: The surface index.

    Raises:
        UncoveredCellError: If a side owns no branch.

    Returns:
        The cell on the positive side and the cell on the negative side.
    """
    values = rhs.switch_values(x[None, :])[0]
    base = ["+" if value > 0 else "-" for value in values]
    pair = []
    for sign in SIGNS:
        base[index] = sign
        cell = CellId("".join(base))
        if cell not in rhs.branches:
            raise UncoveredCellError(cell.signs)
        pair.append(cell)
    return pair[0], pair[1]


def _single_weight(positive: float, negative: float) -> float:
    """Weight of the positive side making the combined normal velocity vanish.

    Args:
        positive: Normal velocity on the positive side.
        negative: Normal velocity on the negative side.

    Returns:
        The weight in [0, 1], all of it on the side tangent to the surface when only one is.
    """
    tangency = SOLVER_DEFAULTS.tangency
    if abs(negative) <= tangency < abs(positive):
        return 0.0
    if abs(positive) <= tangency < abs(negative):
        return 1.0
    if negative - positive <= 0.0:
        return 0.5
    return min(max(negative / (negative - positive), 0.0), 1.0)


def _least_norm(values: FloatArray, normals: FloatArray) -> FloatArray | None:
    """Least-norm convex combination of values tangent to every normal.

    Args:
        values: Branch values of shape (K, m).
        normals: Surface normals of shape (A, m).

    Returns:
        The weights, or None when no tangent combination exists.
    """
    count = values.shape[0]
    gram = values @ values.T
    normal_velocities = normals @ values.T
    result = optimize.minimize(
        lambda weights: 0.5 * float(weights @ gram @ weights),
        np.full(count, 1.0 / count),
        jac=lambda weights: gram @ weights,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * count,
        constraints=[
            {"type": "eq", "fun": lambda weights: np.sum(weights) - 1.0},
            {
                "type": "eq",
                "fun": lambda weights: normal_velocities @ weights,
                "jac": lambda weights: normal_velocities,
            },
        ],
        options={"ftol": 1e-15, "maxiter": 200},
    )
    weights = np.clip(result.x, 0.0, None)
    if not result.success or weights.sum() <= 0.0:
        return None
    weights = weights / weights.sum()
    scale = max(float(np.max(np.abs(values))), 1.0)
    if float(np.max(np.abs(normal_velocities @ weights))) > FEASIBILITY_TOLERANCE * scale:
        return None
    return weights


def _steepest_exit(
    rhs: PiecewiseMap, t: float, x: FloatArray, active: Sequence[int], cells: Sequence[CellId]
) -> CellId | None:
    """The cell whose own flow points into it most steeply.

    Args:
        rhs: The map.
        t: The time.
        x: The point.
        active: The active surface indices.
        cells: The candidate cells.

    Returns:
        The cell, or None when no flow points into its own cell.
    """
    best, best_score = None, 0.0
    normals = [_normal(rhs, index, x) for index in active]
    for cell in cells:
        value = rhs.branch_value(cell, x, t)
        score = min(
            (1.0 if cell.signs[index] == "+" else -1.0)
            * float(value @ normal)
            / float(np.linalg.norm(normal))
            for index, normal in zip(active, normals)
        )
        if score > best_score:
            best, best_score = cell, score
    return best


def decide_at_surface(
    f: FilippovMap, t: float, x: Sequence[float], active: Sequence[int]
) -> Decision:
    """Select the continuation at switching surfaces.

    Args:
        f: The Filippov map.
        t: The time.
        x: A point within the event tolerance of every active surface.
        active: The active surface indices.

    Raises:
        DegenerateNormalError: If an active surface has a vanishing normal at x.

    Returns:
        The decision.
    """
    rhs = f.rhs
    point = np.asarray(x, dtype=np.float64)
    active = tuple(sorted(active))
    tangency = SOLVER_DEFAULTS.tangency
    if len(active) == 1:
        index = active[0]
        normal = _normal(rhs, index, point)
        upper, lower = _sliding_pair(rhs, point, index)
        positive = float(rhs.branch_value(upper, point, t) @ normal)
        negative = float(rhs.branch_value(lower, point, t) @ normal)
        tangential = abs(positive) <= tangency or abs(negative) <= tangency
        if not tangential and positive * negative > 0.0:
            return Decision(EventKind.CROSSING, Mode.smooth(upper if positive > 0.0 else lower))
        if not tangential and positive > 0.0 > negative:
            logger.warning("Repulsive surface %s at t=%s.", rhs.switch_names[index], t)
            return Decision(EventKind.AMBIGUOUS, Mode.stopped(StopReason.AMBIGUOUS))
        if tangential:
            logger.warning(
                "Tangential contact with surface %s at t=%s treated as sliding.",
                rhs.switch_names[index],
                t,
            )
        weight = _single_weight(positive, negative)
        mode = Mode(
            kind=ModeKind.SLIDING,
            cells=(upper, lower),
            active=active,
            weights=(weight, 1.0 - weight),
        )
        return Decision(EventKind.SLIDING_ENTRY, mode, tangential)
    cells = _cells_around(rhs, point, active)
    if not cells:
        signs = rhs.switch_values(point[None, :])[0]
        raise UncoveredCellError(
            "".join(
                "*" if index in active else ("+" if value > 0 else "-")
                for index, value in enumerate(signs)
            )
        )
    values = np.stack([rhs.branch_value(cell, point, t) for cell in cells])
    normals = np.stack([_normal(rhs, index, point) for index in active])
    weights = _least_norm(values, normals)
    if weights is not None:
        mode = Mode(
            kind=ModeKind.SLIDING,
            cells=tuple(cells),
            active=active,
            weights=tuple(float(w) for w in weights),
        )
        return Decision(EventKind.SLIDING_ENTRY, mode)
    target = _steepest_exit(rhs, t, point, active, cells)
    if target is None:
        logger.warning("No continuation at the intersection of surfaces %s.", active)
        return Decision(EventKind.AMBIGUOUS, Mode.stopped(StopReason.AMBIGUOUS))
    return Decision(EventKind.CROSSING, Mode.smooth(target))


class _Integrator:  # pylint: disable=too-many-instance-attributes
    """State of one integration run."""

    def __init__(self, problem: IVProblem):
        """Initialize the run.

        Args:
            problem: The problem.
        """
        self.problem = problem
        self.rhs = problem.rhs
        self.filippov_map = FilippovMap(rhs=problem.rhs)
        self.stepper = DormandPrince(problem.rtol, problem.atol, max_step=problem.horizon)
        self.nodes: list[Node] = []
        self.segments: list[HermiteSegment] = []
        self.events: list[Event] = []

    def sliding_weights(self, mode: Mode, t: float, x: FloatArray) -> FloatArray | None:
        """Current convex weights of a sliding mode.

        Args:
            mode: The sliding mode.
            t: The time.
            x: The state.

        Returns:
            The weights, None when the sliding combination ceased to exist.
        """
        values = np.stack([self.rhs.branch_value(cell, x, t) for cell in mode.cells])
        normals = np.stack([_normal(self.rhs, index, x) for index in mode.active])
        if len(mode.active) == 1:
            positive, negative = values @ normals[0]
            weight = _single_weight(float(positive), float(negative))
            return np.array([weight, 1.0 - weight])
        return _least_norm(values, normals)

    def field(self, mode: Mode) -> Callable[[float, FloatArray], FloatArray]:
        """Vector field of a mode.

        Args:
            mode: The smooth or sliding mode.

        Returns:
            The field.
        """

        def flow(t: float, x: FloatArray) -> FloatArray:
            """Evaluate the field.

            Args:
                t: The time.
                x: The state.

            Raises:
                ExpressionDomainError: If the field is undefined.

            Returns:
                The derivative.
            """
            if mode.kind == ModeKind.SMOOTH:
                value = self.rhs.branch_value(mode.cells[0], x, t)
            else:
                weights = self.sliding_weights(mode, t, x)
                if weights is None:
                    weights = np.asarray(mode.weights)
                values = np.stack([self.rhs.branch_value(cell, x, t) for cell in mode.cells])
                value = weights @ values
            if not np.all(np.isfinite(value)):
                raise ExpressionDomainError(f"Vector field undefined at t={t}, x={x.tolist()}")
            return value

        return flow

    def project(self, mode: Mode, x: FloatArray) -> FloatArray:
        """Newton projection onto the active surfaces.

        Args:
            mode: The sliding mode.
            x: The state.

        Returns:
            The projected state.
        """
        for _ in range(PROJECTION_ITERATIONS):
            values = self.rhs.switch_values(x[None, :])[0][list(mode.active)]
            if np.max(np.abs(values)) == 0.0:
                break
            jacobian = np.stack([_normal(self.rhs, index, x) for index in mode.active])
            x = x - jacobian.T @ np.linalg.solve(jacobian @ jacobian.T, values)
        return x

    def violations(self, mode: Mode, t: float, x: FloatArray) -> tuple[set[int], bool, bool]:
        """Conditions ending the current segment.

        Args:
            mode: The mode.
            t: The time.
            x: The state.

        Returns:
            Switches that left the expected side, whether a sliding mode ceased and whether the
            state left the domain.
        """
        outside = not bool(self.rhs.domain.contains(x[None, :])[0])
        values = self.rhs.switch_values(x[None, :])[0]
        reference = mode.cells[0].signs
        switches = {
            index
            for index, value in enumerate(values)
            if index not in mode.active
            and (value <= 0.0 if reference[index] == "+" else value >= 0.0)
        }
        ceased = False
        if mode.kind == ModeKind.SLIDING:
            ceased = self._sliding_ceased(mode, t, x)
        return switches, ceased, outside

    def _sliding_ceased(self, mode: Mode, t: float, x: FloatArray) -> bool:
        """Whether the sliding mode lost attractivity.

        Args:
            mode: The sliding mode.
            t: The time.
            x: The state.

        Returns:
            True if a side pushes away from the surface or no tangent combination exists.
        """
        if len(mode.active) > 1:
            return self.sliding_weights(mode, t, x) is None
        normal = _normal(self.rhs, mode.active[0], x)
        positive = float(self.rhs.branch_value(mode.cells[0], x, t) @ normal)
        negative = float(self.rhs.branch_value(mode.cells[1], x, t) @ normal)
        tangency = SOLVER_DEFAULTS.tangency
        return positive > tangency or negative < -tangency

    def localize(self, mode: Mode, segment: HermiteSegment) -> tuple[float, float]:
        """Bisect the dense output for the first time a violation holds.

        Args:
            mode: The mode.
            segment: The step whose end violates a condition.

        Returns:
            The last time found without and the first time found with a violation.
        """
        low, high = segment.t0, segment.t1
        while high - low > self.problem.event_tolerance:
            middle = 0.5 * (low + high)
            switches, ceased, outside = self.violations(mode, middle, segment.state(middle))
            if switches or ceased or outside:
                high = middle
            else:
                low = middle
        return low, high

    def add(self, segment: HermiteSegment, mode: Mode) -> None:
        """Append a segment and the node it ends in.

        Args:
            segment: The segment.
            mode: The mode from the new node on.
        """
        self.segments.append(segment)
        self.nodes.append(Node(t=segment.t1, x=tuple(float(v) for v in segment.x1), mode=mode))

    def record(self, t: float, surfaces: Sequence[int], decision: Decision) -> None:
        """Log an event, enforcing the Zeno guard.

        Args:
            t: The event time.
            surfaces: The active surfaces.
            decision: The decision.

        Raises:
            EventAccumulationError: If the number of events exceeds the guard.
        """
        self.events.append(Event(t, tuple(surfaces), decision.kind, decision.tangential))
        logger.debug("Event %s at t=%s on surfaces %s.", decision.kind.value, t, surfaces)
        if len(self.events) > self.problem.max_events:
            state = self.nodes[-1].x if self.nodes else ()
            logger.error("Event accumulation at t=%s.", t)
            raise EventAccumulationError(
                f"More than {self.problem.max_events} events, last at t={t}", time=t, state=state
            )

    def enter(self, t: float, x: FloatArray, active: Sequence[int], kind: EventKind) -> Mode:
        """Decide at surfaces and log the event.

        Args:
            t: The event time.
            x: The state.
            active: The active surfaces.
            kind: Event kind to log instead of the decision kind, for sliding exits.

        Returns:
            The mode to continue with.
        """
        decision = decide_at_surface(self.filippov_map, t, x, active)
        if kind == EventKind.SLIDING_EXIT and decision.kind == EventKind.CROSSING:
            decision = dataclasses.replace(decision, kind=kind)
        self.record(t, active, decision)
        return decision.mode

    def initial_mode(self, x: FloatArray) -> Mode:
        """Mode at the initial state.

        Args:
            x: The initial state.

        Raises:
            UncoveredCellError: If the initial cell owns no branch.

        Returns:
            The mode.
        """
        values = self.rhs.switch_values(x[None, :])[0]
        active = [i for i, value in enumerate(values) if abs(value) <= self.rhs.tolerance]
        if active:
            return self.enter(0.0, x, active, EventKind.SLIDING_ENTRY)
        cell = CellId("".join("+" if value > 0 else "-" for value in values))
        if cell not in self.rhs.branches:
            raise UncoveredCellError(cell.signs)
        return Mode.smooth(cell)

    def near_surfaces(self, x: FloatArray, fx: FloatArray, hit: set[int]) -> list[int]:
        """Active surfaces at an event: the hit ones and those within reach of the tolerance.

        Args:
            x: The event state.
            fx: The field before the event.
            hit: Switches that left their side.

        Returns:
            The sorted active indices.
        """
        values = self.rhs.switch_values(x[None, :])[0]
        reach = EXCLUSION_FACTOR * self.problem.event_tolerance * max(
            float(np.linalg.norm(fx)), 1.0
        )
        near = {i for i, value in enumerate(values) if abs(value) <= max(reach, 1e-15)}
        return sorted(hit | near)

    def run(self) -> Trajectory:  # pylint: disable=too-many-locals,too-many-branches
        """Integrate up to the horizon or a stop.

        Returns:
            The trajectory.
        """
        horizon = self.problem.horizon
        t, x = 0.0, np.asarray(self.problem.x0, dtype=np.float64)
        mode = self.initial_mode(x)
        if mode.kind == ModeKind.SLIDING:
            x = self.project(mode, x)
        self.nodes.append(Node(t=t, x=tuple(float(v) for v in x), mode=mode))
        h: float | None = None
        while mode.kind != ModeKind.STOPPED and horizon - t > 0.0:
            field = self.field(mode)
            fx = field(t, x)
            if h is None:
                h = self.stepper.initial_step(field, t, x, fx, horizon - t)
            step = self.stepper.step(field, t, x, fx, min(h, horizon - t))
            h = step.next_step
            segment = step.segment
            if horizon - segment.t1 < self.problem.event_tolerance:
                segment = dataclasses.replace(segment, t1=horizon)
            if mode.kind == ModeKind.SLIDING:
                segment = segment.with_end_state(self.project(mode, segment.x1))
            switches, ceased, outside = self.violations(mode, segment.t1, segment.x1)
            if not (switches or ceased or outside):
                if mode.kind == ModeKind.SLIDING:
                    weights = self.sliding_weights(mode, segment.t1, segment.x1)
                    if weights is not None:
                        mode = dataclasses.replace(
                            mode, weights=tuple(float(w) for w in weights)
                        )
                self.add(segment, mode)
                t, x = segment.t1, segment.x1
                continue
            last_clear, event_time = self.localize(mode, segment)
            partial = segment.restrict(event_time)
            switches, ceased, outside = self.violations(mode, event_time, partial.x1)
            if outside:
                mode = Mode.stopped(StopReason.DOMAIN_EXIT)
                if last_clear > segment.t0:
                    self.add(segment.restrict(last_clear), mode)
                else:
                    self.nodes[-1] = dataclasses.replace(self.nodes[-1], mode=mode)
                logger.warning("State left the domain at t=%s.", event_time)
                break
            if mode.kind == ModeKind.SLIDING:
                partial = partial.with_end_state(self.project(mode, partial.x1))
            if switches:
                active = self.near_surfaces(partial.x1, fx, switches)
                active = sorted(set(active) | set(mode.active))
                new_mode = self.enter(event_time, partial.x1, active, EventKind.SLIDING_ENTRY)
            else:
                exit_cell = self._exit_cell(mode, event_time, partial.x1)
                if exit_cell is None:
                    new_mode = self.enter(
                        event_time, partial.x1, mode.active, EventKind.SLIDING_EXIT
                    )
                else:
                    new_mode = Mode.smooth(exit_cell)
                    self.record(
                        event_time, mode.active, Decision(EventKind.SLIDING_EXIT, new_mode)
                    )
            if new_mode.kind == ModeKind.SLIDING:
                partial = partial.with_end_state(self.project(new_mode, partial.x1))
            self.add(partial, new_mode)
            t, x, mode = partial.t1, partial.x1, new_mode
            h = None
        if mode.kind != ModeKind.STOPPED:
            last = self.nodes[-1]
            self.nodes[-1] = dataclasses.replace(last, mode=Mode.stopped(StopReason.HORIZON))
        stop = self.nodes[-1].mode.reason or StopReason.HORIZON
        logger.info(
            "Integration ended at t=%s (%s) with %s nodes and %s events.",
            self.nodes[-1].t,
            stop.value,
            len(self.nodes),
            len(self.events),
        )
        return Trajectory(
            nodes=tuple(self.nodes),
            segments=tuple(self.segments),
            events=tuple(self.events),
            stop=stop,
        )

    def _exit_cell(self, mode: Mode, t: float, x: FloatArray) -> CellId | None:
        """Cell a single-surface sliding mode exits into.

        Args:
            mode: The sliding mode.
            t: The time.
            x: The state.

        Returns:
            The cell on the side pushing away, None for intersections.
        """
        if len(mode.active) > 1:
            return None
        normal = _normal(self.rhs, mode.active[0], x)
        positive = float(self.rhs.branch_value(mode.cells[0], x, t) @ normal)
        return mode.cells[0] if positive > SOLVER_DEFAULTS.tangency else mode.cells[1]


def integrate(problem: IVProblem) -> Trajectory:
    """Integrate x' in F(t, x) from x0 over [0, horizon] in the Filippov sense.

    Args:
        problem: The initial value problem.

    Raises:
        StepSizeUnderflowError: If the step size underflows.
        EventAccumulationError: If the Zeno guard triggers.

    Returns:
        The trajectory, stopped early at domain exits or ambiguous surfaces.
    """
    return _Integrator(problem).run()


def _sample_times(
    trajectory: Trajectory, samples: int, window: float, seed: int
) -> list[float]:
    """Sorted sample times away from event times.

    Args:
        trajectory: The trajectory.
        samples: The number of times.
        window: Half width of the excluded windows around events.
        seed: The run seed.

    Returns:
        The times.
    """
    start, end = trajectory.nodes[0].t, trajectory.nodes[-1].t
    events = np.asarray([event.t for event in trajectory.events])
    rng = sampling.generator(seed, VERIFY_STREAM)
    times: list[float] = []
    for _ in range(100):
        if len(times) >= samples:
            break
        draws = start + (end - start) * rng.random(samples)
        if events.size:
            keep = np.min(np.abs(draws[:, None] - events[None, :]), axis=1) > window
            draws = draws[keep]
        times.extend(float(value) for value in draws)
    return sorted(times[:samples])


def verify_inclusion(  # pylint: disable=too-many-arguments
    trajectory: Trajectory,
    f: FilippovMap,
    samples: int = 500,
    tol: float = 1e-6,
    event_tolerance: float = SOLVER_DEFAULTS.event_tolerance,
    seed: int = 0,
) -> ResidualReport:
    """Check x'(t) in F(t, x(t)) at sample times away from events.

    Args:
        trajectory: The trajectory.
        f: The Filippov map.
        samples: Number of sample times.
        tol: Pass tolerance of the support violation.
        event_tolerance: Event tolerance used while integrating.
        seed: The run seed.

    Returns:
        The residual report.
    """
    if len(trajectory.nodes) < 2:
        return ResidualReport(times=(), violations=(), tolerance=tol)
    window = EXCLUSION_FACTOR * event_tolerance
    adjacency = max(f.rhs.tolerance, window)
    times = _sample_times(trajectory, samples, window, seed)
    violations = []
    for t in times:
        x = trajectory.state(t)
        hull = filippov.filippov_set(f, t, x, adjacency=adjacency)
        violations.append(convex.violation(hull, trajectory.derivative(t)))
    report = ResidualReport(times=tuple(times), violations=tuple(violations), tolerance=tol)
    logger.info(
        "Inclusion check over %s samples: max violation %s.", len(times), report.max_violation
    )
    return report
