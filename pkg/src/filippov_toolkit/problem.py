# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for loading and validating problem files."""

import dataclasses
import hashlib
import json
import logging
import math
import pathlib
from typing import Any, Mapping, Sequence

import yaml

from filippov_toolkit import expr, region
from filippov_toolkit.config import HULL_DEFAULTS, RANGE_DEFAULTS, IdealKind, QueryKind
from filippov_toolkit.errors import FileAccessError, FilippovToolkitError, ProblemFileError
from filippov_toolkit.filippov import FilippovMap
from filippov_toolkit.piecewise import SIGNS, CellId, Override, PiecewiseMap
from filippov_toolkit.region import (
    Constraint,
    DegenerateBox,
    DomainBox,
    Generator,
    MeasureModel,
    NegligibilityIdeal,
    NullSet,
    PointList,
    Region,
    SurfaceGenerator,
)
from filippov_toolkit.solver import IVProblem

logger = logging.getLogger(__name__)

SECTIONS = frozenset(
    {
        "seed",
        "dims",
        "domain",
        "tolerance",
        "switches",
        "branches",
        "overrides",
        "measure",
        "ideal",
        "ivp",
        "queries",
    }
)
WHERE_KINDS = ("points", "surface", "expression", "box")


@dataclasses.dataclass(frozen=True)
class Query:  # pylint: disable=too-many-instance-attributes
    """Named query block.

    Attributes:
        name: The block name.
        kind: The query kind.
        region: Region of an essential range query, the whole domain if None.
        resolution: Codomain resolution of an essential range query.
        time: Time of a Filippov set query.
        state: State of a Filippov set query.
        generic: Whether a Filippov set query uses the shrinking ball computation.
        samples: Number of sample times of a verification.
        tolerance: Pass tolerance of a verification.
    """

    name: str
    kind: QueryKind
    region: Region | None = None
    resolution: float = RANGE_DEFAULTS.resolution
    time: float = 0.0
    state: tuple[float, ...] = ()
    generic: bool = False
    samples: int = 500
    tolerance: float = HULL_DEFAULTS.tolerance


@dataclasses.dataclass(frozen=True)
class Problem:  # pylint: disable=too-many-instance-attributes
    """Validated problem file.

    Attributes:
        path: The source file.
        config_hash: SHA-256 digest of the canonicalized document.
        seed: The run seed from the file.
        rhs: The piecewise right-hand side.
        ideal: The negligibility ideal.
        model: The measure model, None for Lebesgue measure on the domain.
        ivp: The initial value problem, if the file declares one.
        queries: The query blocks by name.
    """

    path: pathlib.Path
    config_hash: str
    seed: int
    rhs: PiecewiseMap
    ideal: NegligibilityIdeal
    model: MeasureModel | None
    ivp: IVProblem | None
    queries: Mapping[str, Query]

    def filippov_map(self, tolerance: float | None = None, seed: int | None = None) -> FilippovMap:
        """The Filippov map of the right-hand side.

        Args:
            tolerance: Hull tolerance, the default if None.
            seed: Sampling seed, the file seed if None.

        Returns:
            The map.
        """
        return FilippovMap(
            rhs=self.rhs,
            tolerance=tolerance or HULL_DEFAULTS.tolerance,
            ideal=self.ideal,
            model=self.model,
            seed=self.seed if seed is None else seed,
        )

    def query(self, name: str, kind: QueryKind | None = None) -> Query:
        """Look up a query block.

        Args:
            name: The block name.
            kind: The required kind, any if None.

        Raises:
            ProblemFileError: If no block of that name and kind exists.

        Returns:
            The query.
        """
        found = self.queries.get(name)
        if found is None:
            raise ProblemFileError(f"Unknown query {name!r}", field=f"queries.{name}")
        if kind is not None and found.kind != kind:
            raise ProblemFileError(
                f"Query {name!r} is a {found.kind.value} query, not {kind.value}",
                field=f"queries.{name}.kind",
            )
        return found


def _canonical(value: Any) -> Any:
    """Normalize a parsed document for hashing.

    Args:
        value: A parsed YAML value.

    Returns:
        The value with numbers as floats and mapping keys as strings.
    """
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, Mapping):
        return {str(key): _canonical(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(item) for item in value]
    return str(value)


def config_hash(document: Any) -> str:
    """Stable digest of a parsed problem document.

    Args:
        document: The parsed document.

    Returns:
        The hexadecimal SHA-256 digest of the canonical JSON dump.
    """
    text = json.dumps(_canonical(document), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _line_index(text: str) -> dict[str, int]:
    """One based line numbers of every field path.

    Args:
        text: The YAML text.

    Returns:
        Mapping of dotted paths such as overrides[0].value to line numbers.
    """
    lines: dict[str, int] = {}

    def walk(node: yaml.Node, path: str) -> None:
        """Record the lines below a node.

        Args:
            node: The node.
            path: Its dotted path.
        """
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                child = f"{path}.{key.value}" if path else str(key.value)
                walk(value, child)
                lines[child] = key.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for index, item in enumerate(node.value):
                child = f"{path}[{index}]"
                lines[child] = item.start_mark.line + 1
                walk(item, child)

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, "")
    return lines


class _Loader:  # pylint: disable=too-many-public-methods
    """Field by field conversion of a parsed document."""

    def __init__(self, document: Mapping[str, Any], lines: Mapping[str, int]):
        """Initialize the loader.

        Args:
            document: The parsed document.
            lines: Line numbers by field path.
        """
        self.document = document
        self.lines = lines
        self.dim = 1
        self.codomain_dim = 1
        self.domain: DomainBox | None = None
        self.switches: dict[str, expr.Expr] = {}

    def fail(self, message: str, field: str) -> ProblemFileError:
        """Build a diagnostic for a field.

        Args:
            message: The error description.
            field: The dotted field path.

        Returns:
            The error, carrying the line of the field or of its closest ancestor.
        """
        path = field
        while path and path not in self.lines:
            cut = max(path.rfind("."), path.rfind("["))
            path = path[:cut] if cut > 0 else ""
        return ProblemFileError(message, field=field, line=self.lines.get(path))

    def mapping(self, value: Any, field: str) -> Mapping[str, Any]:
        """Require a mapping.

        Args:
            value: The value.
            field: The field path.

        Raises:
            ProblemFileError: If the value is not a mapping.

        Returns:
            The mapping.
        """
        if not isinstance(value, Mapping):
            raise self.fail("Expected a mapping", field)
        return value

    def sequence(self, value: Any, field: str) -> Sequence[Any]:
        """Require a list.

        Args:
            value: The value.
            field: The field path.

        Raises:
            ProblemFileError: If the value is not a list.

        Returns:
            The list.
        """
        if not isinstance(value, list):
            raise self.fail("Expected a list", field)
        return value

    def number(self, value: Any, field: str) -> float:
        """Coerce a YAML number or numeric string.

        Args:
            value: The value.
            field: The field path.

        Raises:
            ProblemFileError: If the value is not a finite number.

        Returns:
            The number.
        """
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise self.fail(f"Expected a number, got {value!r}", field)
        try:
            result = float(value)
        except ValueError as exc:
            raise self.fail(f"Expected a number, got {value!r}", field) from exc
        if not math.isfinite(result):
            raise self.fail(f"Expected a finite number, got {value!r}", field)
        return result

    def positive(self, value: Any, field: str) -> float:
        """Coerce a positive number.

        Args:
            value: The value.
            field: The field path.

        Raises:
            ProblemFileError: If the value is not positive.

        Returns:
            The number.
        """
        result = self.number(value, field)
        if not result > 0.0:
            raise self.fail(f"Expected a positive number, got {value!r}", field)
        return result

    def integer(self, value: Any, field: str, minimum: int = 0) -> int:
        """Coerce an integer.

        Args:
            value: The value.
            field: The field path.
            minimum: The smallest accepted value.

        Raises:
            ProblemFileError: If the value is not an integer of at least the minimum.

        Returns:
            The integer.
        """
        result = self.number(value, field)
        if not result.is_integer() or result < minimum:
            raise self.fail(f"Expected an integer of at least {minimum}, got {value!r}", field)
        return int(result)

    def vector(self, value: Any, field: str, length: int) -> tuple[float, ...]:
        """Coerce a list of numbers of a given length.

        Args:
            value: The value.
            field: The field path.
            length: The required length.

        Raises:
            ProblemFileError: If the length differs.

        Returns:
            The vector.
        """
        items = self.sequence(value, field)
        if len(items) != length:
            raise self.fail(f"Expected {length} entries, got {len(items)}", field)
        return tuple(self.number(item, f"{field}[{index}]") for index, item in enumerate(items))

    def expression(self, value: Any, field: str) -> expr.Expr:
        """Parse an expression given as text or number.

        Args:
            value: The value.
            field: The field path.

        Raises:
            ProblemFileError: If the expression does not parse.

        Returns:
            The expression.
        """
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise self.fail(f"Expected an expression, got {value!r}", field)
        try:
            return expr.parse(str(value), self.dim)
        except (FilippovToolkitError, ValueError) as exc:
            raise self.fail(str(exc), field) from exc

    def box(self, value: Any, field: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
        """Read lower and upper corners.

        Args:
            value: The value.
            field: The field path.

        Returns:
            The corners.
        """
        block = self.mapping(value, field)
        return (
            self.vector(block.get("lower"), f"{field}.lower", self.dim),
            self.vector(block.get("upper"), f"{field}.upper", self.dim),
        )

    def base(self) -> DomainBox:
        """The domain box.

        Raises:
            ProblemFileError: If the domain is not loaded yet.

        Returns:
            The domain.
        """
        if self.domain is None:
            raise self.fail("Domain is required", "domain")
        return self.domain

    def load_dims(self) -> None:
        """Read the state and value dimensions."""
        dims = self.mapping(self.document.get("dims"), "dims")
        self.dim = self.integer(dims.get("m"), "dims.m", minimum=1)
        self.codomain_dim = self.integer(dims.get("n"), "dims.n", minimum=1)

    def load_domain(self) -> None:
        """Read the domain box.

        Raises:
            ProblemFileError: If the box is invalid.
        """
        lower, upper = self.box(self.document.get("domain"), "domain")
        try:
            self.domain = DomainBox.of(lower, upper)
        except FilippovToolkitError as exc:
            raise self.fail(str(exc), "domain") from exc

    def load_switches(self) -> None:
        """Read the named switching expressions in file order."""
        block = self.mapping(self.document.get("switches") or {}, "switches")
        for name, value in block.items():
            self.switches[str(name)] = self.expression(value, f"switches.{name}")

    def constraints(self, value: Any, field: str) -> tuple[Constraint, ...]:
        """Read [expression, sign] pairs.

        Args:
            value: The value.
            field: The field path.

        Raises:
            ProblemFileError: If a pair is malformed.

        Returns:
            The constraints.
        """
        result = []
        for index, item in enumerate(self.sequence(value, field)):
            path = f"{field}[{index}]"
            pair = self.sequence(item, path)
            if len(pair) != 2 or pair[1] not in (">", "<"):
                raise self.fail("Expected [expression, '>' or '<']", path)
            result.append(Constraint(self.expression(pair[0], f"{path}[0]"), pair[1]))
        return tuple(result)

    def region(self, value: Any, field: str) -> Region:
        """Read a fat region: an optional box and a constraint conjunction.

        Args:
            value: The value.
            field: The field path.

        Raises:
            ProblemFileError: If the region is provably empty or leaves the domain.

        Returns:
            The region.
        """
        block = self.mapping(value, field)
        base = self.base()
        if "box" in block:
            lower, upper = self.box(block["box"], f"{field}.box")
            try:
                box = DomainBox.of(lower, upper)
            except FilippovToolkitError as exc:
                raise self.fail(str(exc), f"{field}.box") from exc
            if not base.contains_box(box):
                raise self.fail("Region box leaves the domain", f"{field}.box")
            base = box
        result = Region.where(base, self.constraints(block.get("constraints", []), field))
        if region.is_provably_empty(result):
            raise self.fail("Region has an empty interior", field)
        return result

    def where(self, value: Any, field: str) -> Generator:
        """Read one null generator.

        Args:
            value: The value.
            field: The field path.

        Raises:
            ProblemFileError: If the block is malformed.

        Returns:
            The generator.
        """
        block = self.mapping(value, field)
        kinds = [kind for kind in WHERE_KINDS if kind in block]
        if len(kinds) != 1 or len(block) != 1:
            raise self.fail(f"Expected exactly one of {', '.join(WHERE_KINDS)}", field)
        kind = kinds[0]
        path = f"{field}.{kind}"
        try:
            match kind:
                case "points":
                    items = self.sequence(block[kind], path)
                    return PointList(
                        points=tuple(
                            self.vector(item, f"{path}[{index}]", self.dim)
                            for index, item in enumerate(items)
                        )
                    )
                case "surface":
                    name = str(block[kind])
                    if name not in self.switches:
                        raise self.fail(f"Unknown switch {name!r}", path)
                    return SurfaceGenerator(expr=self.switches[name])
                case "expression":
                    surface = self.expression(block[kind], path)
                    region.validate_regular_surface(surface, self.base())
                    return SurfaceGenerator(expr=surface)
                case _:
                    lower, upper = self.box(block[kind], path)
                    return DegenerateBox(lower=lower, upper=upper)
        except ProblemFileError:
            raise
        except FilippovToolkitError as exc:
            raise self.fail(str(exc), path) from exc

    def load_rhs(self) -> PiecewiseMap:
        """Read branches, overrides and tolerance into the piecewise map.

        Raises:
            ProblemFileError: If the map is inconsistent.

        Returns:
            The map.
        """
        branches: dict[CellId, tuple[expr.Expr, ...]] = {}
        block = self.mapping(self.document.get("branches"), "branches")
        for key, value in block.items():
            field = f"branches.{key}"
            signs = "" if key is None else str(key)
            if len(signs) != len(self.switches) or any(char not in SIGNS for char in signs):
                raise self.fail(
                    f"Cell key must have one '+' or '-' per switch, got {signs!r}", field
                )
            items = self.sequence(value, field)
            if len(items) != self.codomain_dim:
                raise self.fail(f"Expected {self.codomain_dim} components", field)
            branches[CellId(signs)] = tuple(
                self.expression(item, f"{field}[{index}]") for index, item in enumerate(items)
            )
        overrides = []
        entries = self.sequence(self.document.get("overrides") or [], "overrides")
        for index, item in enumerate(entries):
            field = f"overrides[{index}]"
            entry = self.mapping(item, field)
            overrides.append(
                Override(
                    where=NullSet(generators=(self.where(entry.get("where"), f"{field}.where"),)),
                    value=self.vector(entry.get("value"), f"{field}.value", self.codomain_dim),
                )
            )
        options: dict[str, Any] = {}
        if self.document.get("tolerance") is not None:
            options["tolerance"] = self.positive(self.document["tolerance"], "tolerance")
        try:
            rhs = PiecewiseMap(
                domain=self.base(),
                codomain_dim=self.codomain_dim,
                switches=tuple(self.switches.values()),
                branches=branches,
                overrides=tuple(overrides),
                switch_names=tuple(self.switches),
                **options,
            )
        except FilippovToolkitError as exc:
            raise self.fail(str(exc), "branches") from exc
        return rhs

    def load_model(self) -> MeasureModel | None:
        """Read the optional density and support.

        Raises:
            ProblemFileError: If the density is invalid.

        Returns:
            The measure model, None for Lebesgue measure.
        """
        block = self.document.get("measure")
        if block is None:
            return None
        block = self.mapping(block, "measure")
        density = None
        if "density" in block:
            density = self.expression(block["density"], "measure.density")
        support = None
        if "support" in block:
            support = self.region(block["support"], "measure.support")
        try:
            return MeasureModel(base=self.base(), density=density, support=support)
        except FilippovToolkitError as exc:
            raise self.fail(str(exc), "measure") from exc

    def load_ideal(self) -> NegligibilityIdeal:
        """Read the negligibility ideal.

        Raises:
            ProblemFileError: If the kind is unknown.

        Returns:
            The ideal.
        """
        block = self.mapping(self.document.get("ideal") or {"kind": "lebesgue"}, "ideal")
        try:
            kind = IdealKind(block.get("kind", IdealKind.LEBESGUE_NULL.value))
        except ValueError as exc:
            raise self.fail(f"Unknown ideal kind {block.get('kind')!r}", "ideal.kind") from exc
        if kind == IdealKind.LEBESGUE_NULL:
            return NegligibilityIdeal()
        generators = self.sequence(block.get("generators", []), "ideal.generators")
        return NegligibilityIdeal(
            kind=kind,
            generators=tuple(
                self.where(item, f"ideal.generators[{index}]")
                for index, item in enumerate(generators)
            ),
        )

    def load_ivp(self, rhs: PiecewiseMap) -> IVProblem | None:
        """Read the optional initial value problem.

        Args:
            rhs: The right-hand side.

        Raises:
            ProblemFileError: If the problem is invalid.

        Returns:
            The problem.
        """
        block = self.document.get("ivp")
        if block is None:
            return None
        block = self.mapping(block, "ivp")
        options: dict[str, Any] = {}
        for name in ("rtol", "atol", "event_tolerance", "bound"):
            if name in block:
                options[name] = self.positive(block[name], f"ivp.{name}")
        if "max_events" in block:
            options["max_events"] = self.integer(block["max_events"], "ivp.max_events", 1)
        try:
            return IVProblem(
                rhs=rhs,
                x0=self.vector(block.get("x0"), "ivp.x0", self.dim),
                horizon=self.positive(block.get("horizon"), "ivp.horizon"),
                **options,
            )
        except FilippovToolkitError as exc:
            if isinstance(exc, ProblemFileError):
                raise
            raise self.fail(str(exc), "ivp") from exc

    def load_query(self, name: str, value: Any) -> Query:
        """Read one query block.

        Args:
            name: The block name.
            value: The block.

        Raises:
            ProblemFileError: If the block is invalid.

        Returns:
            The query.
        """
        field = f"queries.{name}"
        block = self.mapping(value, field)
        try:
            kind = QueryKind(block.get("kind"))
        except ValueError as exc:
            raise self.fail(f"Unknown query kind {block.get('kind')!r}", f"{field}.kind") from exc
        options: dict[str, Any] = {}
        match kind:
            case QueryKind.ESS_RANGE:
                if "region" in block:
                    options["region"] = self.region(block["region"], f"{field}.region")
                if "resolution" in block:
                    options["resolution"] = self.positive(
                        block["resolution"], f"{field}.resolution"
                    )
            case QueryKind.FILIPPOV_SET:
                options["time"] = self.number(block.get("time", 0.0), f"{field}.time")
                options["state"] = self.vector(block.get("state"), f"{field}.state", self.dim)
                options["generic"] = bool(block.get("generic", False))
            case QueryKind.VERIFY:
                if "samples" in block:
                    options["samples"] = self.integer(block["samples"], f"{field}.samples", 1)
                if "tolerance" in block:
                    options["tolerance"] = self.positive(
                        block["tolerance"], f"{field}.tolerance"
                    )
            case _:
                pass
        return Query(name=name, kind=kind, **options)


def parse(text: str, path: pathlib.Path, validate: bool = True) -> Problem:
    """Build a problem from YAML text.

    Args:
        text: The YAML text.
        path: The source path used in diagnostics.
        validate: Whether to run the sampling based map validation.

    Raises:
        ProblemFileError: If the document is invalid.

    Returns:
        The problem.
    """
    try:
        document = yaml.safe_load(text)
        lines = _line_index(text)
    except yaml.YAMLError as exc:
        logger.exception("Invalid YAML in %s.", path)
        mark = getattr(exc, "problem_mark", None)
        raise ProblemFileError(
            "Invalid YAML", field="", line=None if mark is None else mark.line + 1
        ) from exc
    loader = _Loader(document if isinstance(document, Mapping) else {}, lines)
    if not isinstance(document, Mapping):
        raise loader.fail("Problem file must be a mapping", "")
    unknown = sorted(str(key) for key in document if key not in SECTIONS)
    if unknown:
        raise loader.fail(f"Unknown section {unknown[0]!r}", unknown[0])
    seed = loader.integer(document.get("seed", 0), "seed")
    loader.load_dims()
    loader.load_domain()
    loader.load_switches()
    rhs = loader.load_rhs()
    model = loader.load_model()
    ideal = loader.load_ideal()
    ivp = loader.load_ivp(rhs)
    queries = {
        str(name): loader.load_query(str(name), value)
        for name, value in loader.mapping(document.get("queries") or {}, "queries").items()
    }
    if validate:
        try:
            rhs.validate(seed=seed)
        except FilippovToolkitError as exc:
            raise loader.fail(str(exc), "branches") from exc
    logger.info("Loaded %s with %s queries.", path, len(queries))
    return Problem(
        path=path,
        config_hash=config_hash(document),
        seed=seed,
        rhs=rhs,
        ideal=ideal,
        model=model,
        ivp=ivp,
        queries=queries,
    )


def load(path: pathlib.Path, validate: bool = True) -> Problem:
    """Read and validate a problem file.

    Args:
        path: The file path.
        validate: Whether to run the sampling based map validation.

    Raises:
        FileAccessError: If the file cannot be read.

    Returns:
        The problem.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        logger.exception("Unable to read %s.", path)
        raise FileAccessError(f"Unable to read problem file {path}") from exc
    return parse(text, path, validate)
