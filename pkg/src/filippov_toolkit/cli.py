# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Main entrypoint for filippov-toolkit cli application."""

import logging as std_logging
import pathlib
import sys
from typing import Any, Callable, NamedTuple

import click

from filippov_toolkit import config, essential, filippov, logging, problem, report, solver, utils
from filippov_toolkit.config import ExitCode, OutputFormat, QueryKind
from filippov_toolkit.errors import FileAccessError, FilippovToolkitError, ProblemFileError
from filippov_toolkit.region import Region

logger = std_logging.getLogger(__name__)

PATH_TYPE = click.Path(path_type=pathlib.Path)


@click.option(
    "--log-level",
    type=click.Choice(config.LOG_LEVELS),
    default="info",
    help="Configure logging verbosity.",
)
@click.group()
def main(log_level: str | int) -> None:
    """Run entrypoint for the Filippov toolkit CLI.

    Args:
        log_level: The logging verbosity to apply.
    """
    logging.configure(log_level=log_level)


def _seed_option(func: Callable[..., Any]) -> Callable[..., Any]:
    """Attach the --seed option.

    Args:
        func: The command function.

    Returns:
        The decorated function.
    """
    return click.option(
        "--seed",
        type=int,
        default=None,
        envvar=config.SEED_ENV_VAR,
        help="Sampling seed. Defaults to the seed of the problem file.",
    )(func)


def _quiet_option(func: Callable[..., Any]) -> Callable[..., Any]:
    """Attach the --quiet option.

    Args:
        func: The command function.

    Returns:
        The decorated function.
    """
    return click.option(
        "--quiet",
        is_flag=True,
        default=False,
        help="Do not print the report, the exit code carries the outcome.",
    )(func)


def _tolerance_option(func: Callable[..., Any]) -> Callable[..., Any]:
    """Attach the --tolerance option.

    Args:
        func: The command function.

    Returns:
        The decorated function.
    """
    return click.option(
        "--tolerance",
        type=click.FloatRange(min=0.0, min_open=True),
        default=None,
        help="Override the hull or residual tolerance of the query.",
    )(func)


class Outcome(NamedTuple):
    """Result of a command body.

    Attributes:
        config_hash: Digest of the problem file.
        results: The results payload.
        code: The exit code.
        table: Tabular output replacing the report, if requested.
    """

    config_hash: str
    results: dict[str, Any]
    code: ExitCode = ExitCode.OK
    table: str | None = None


def _emit(text: str, output: pathlib.Path | None, quiet: bool) -> None:
    """Write text to a file and, unless quiet, to standard output.

    Args:
        text: The text.
        output: The file, None for standard output only.
        quiet: Whether to skip standard output.

    Raises:
        FileAccessError: If the file cannot be written.
    """
    if output is not None:
        try:
            output.write_text(text, encoding="utf-8")
        except OSError as exc:
            logger.exception("Unable to write %s.", output)
            raise FileAccessError(f"Unable to write {output}") from exc
    if not quiet:
        click.echo(text, nl=False)


def _run(
    command: str,
    body: Callable[[], Outcome],
    quiet: bool = False,
    output: pathlib.Path | None = None,
) -> None:
    """Execute a command body and map its outcome to an exit code.

    Args:
        command: The command echo.
        body: Computes the outcome.
        quiet: Whether to suppress the report.
        output: Optional file receiving the report or table.
    """
    timed_body = utils.timed(label=command, local_logger=logger)(body)
    try:
        with report.collect_warnings() as warnings:
            outcome, elapsed = timed_body()
        if outcome.table is not None:
            _emit(outcome.table, output, quiet)
        else:
            run_report = report.RunReport(
                command=command,
                config_hash=outcome.config_hash,
                results=outcome.results,
                warnings=warnings,
                wall_time=elapsed,
            )
            _emit(run_report.dump(), output, quiet)
    except FileAccessError as exc:
        click.echo(f"Error: {exc}", err=True)
        sys.exit(ExitCode.IO_ERROR)
    except FilippovToolkitError as exc:
        click.echo(f"Error: {_describe(exc)}", err=True)
        sys.exit(ExitCode.CONFIG_ERROR)
    sys.exit(outcome.code)


def _describe(exc: FilippovToolkitError) -> str:
    """Error text with the field and line of problem file errors.

    Args:
        exc: The error.

    Returns:
        The message.
    """
    if isinstance(exc, ProblemFileError) and exc.field:
        where = f" (line {exc.line})" if exc.line is not None else ""
        return f"{exc.field}{where}: {exc}"
    return str(exc)


@main.command(name="check")
@click.argument("path", type=PATH_TYPE)
@_quiet_option
def check(path: pathlib.Path, quiet: bool) -> None:
    """Parse and validate the problem file <path>.

    Args:
        path: The problem file.
        quiet: Whether to suppress the report.
    """

    def body() -> Outcome:
        """Load the file.

        Returns:
            The summary of the loaded problem.
        """
        loaded = problem.load(path)
        results = {
            "switches": list(loaded.rhs.switch_names),
            "cells": [cell.signs for cell in loaded.rhs.owned_cells],
            "overrides": len(loaded.rhs.overrides),
            "ivp": loaded.ivp is not None,
            "queries": sorted(loaded.queries),
        }
        return Outcome(loaded.config_hash, results)

    _run(f"check {path}", body, quiet)


@main.command(name="ess-range")
@click.argument("path", type=PATH_TYPE)
@click.argument("query")
@_seed_option
@_quiet_option
def ess_range(path: pathlib.Path, query: str, seed: int | None, quiet: bool) -> None:
    """Compute the essential range of query <query> in problem file <path>.

    Args:
        path: The problem file.
        query: The ess-range query name.
        seed: The sampling seed.
        quiet: Whether to suppress the report.
    """

    def body() -> Outcome:
        """Run the query.

        Returns:
            The range, its canonical null set and the classified candidate values.
        """
        loaded = problem.load(path)
        block = loaded.query(query, QueryKind.ESS_RANGE)
        region = block.region or Region.whole(loaded.rhs.domain)
        run_seed = loaded.seed if seed is None else seed
        result = essential.essential_range(
            loaded.rhs,
            region,
            loaded.ideal,
            loaded.model,
            resolution=block.resolution,
            seed=run_seed,
        )
        null_set = essential.canonical_null_set(loaded.rhs, region, loaded.ideal, loaded.model)
        candidates = essential.bad_values(
            loaded.rhs, region, loaded.ideal, loaded.model, seed=run_seed
        )
        results = {
            "range": report.range_to_dict(result),
            "null_set": report.null_set_to_dict(null_set),
            "candidates": [report.classification_to_dict(item) for item in candidates],
        }
        return Outcome(loaded.config_hash, results)

    _run(f"ess-range {path} {query}", body, quiet)


def _format_option(help_text: str) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
    """Build the --format option.

    Args:
        help_text: The option help.

    Returns:
        The decorator.
    """
    return click.option(
        "--format",
        "format_",
        type=click.Choice([item.value for item in OutputFormat]),
        default=OutputFormat.STRUCTURED.value,
        help=help_text,
    )


@main.command(name="filippov")
@click.argument("path", type=PATH_TYPE)
@click.argument("query", required=False)
@click.option("--time", "time_", type=float, default=None, help="Time of the set.")
@click.option(
    "--state", type=float, multiple=True, help="State component, repeated once per dimension."
)
@click.option(
    "--generic/--fast",
    default=None,
    help="Shrink balls around the state instead of taking the adjacent branch values.",
)
@_format_option("Report document, or a table of support values.")
@_tolerance_option
@_seed_option
@_quiet_option
def filippov_set(  # pylint: disable=too-many-arguments
    path: pathlib.Path,
    query: str | None,
    time_: float | None,
    state: tuple[float, ...],
    generic: bool | None,
    format_: str,
    tolerance: float | None,
    seed: int | None,
    quiet: bool,
) -> None:
    """Compute the Filippov set at a state of problem file <path>.

    The time and state come from the filippov-set query <query> unless given as options.

    Args:
        path: The problem file.
        query: The filippov-set query name.
        time_: The time.
        state: The state.
        generic: Whether to use the shrinking ball computation.
        format_: The output format.
        tolerance: The hull tolerance.
        seed: The sampling seed.
        quiet: Whether to suppress the report.
    """

    def body() -> Outcome:
        """Compute the set.

        Raises:
            ProblemFileError: If no state is given.

        Returns:
            The set with the adjacent branch values.
        """
        loaded = problem.load(path)
        block = (
            loaded.query(query, QueryKind.FILIPPOV_SET)
            if query
            else problem.Query(name="", kind=QueryKind.FILIPPOV_SET)
        )
        x = state or block.state
        if not x:
            raise ProblemFileError("No state given", field="state")
        t = block.time if time_ is None else time_
        fmap = loaded.filippov_map(tolerance=tolerance, seed=seed)
        use_generic = block.generic if generic is None else generic
        hull = filippov.filippov_set(fmap, t, x, generic=use_generic)
        results = {
            "time": float(t),
            "state": [float(value) for value in x],
            "generic": use_generic,
            "hull": report.hull_to_dict(hull),
            "cluster_values": [list(value) for value in filippov.cluster_values(fmap.rhs, t, x)],
        }
        table = report.hull_table(hull) if format_ == OutputFormat.TABULAR else None
        return Outcome(loaded.config_hash, results, table=table)

    _run(f"filippov {path} {query or ''}".rstrip(), body, quiet)


@main.command(name="solve")
@click.argument("path", type=PATH_TYPE)
@_format_option("Report document with the dense output, or a table of the nodes.")
@click.option(
    "--output",
    type=PATH_TYPE,
    default=None,
    help="Also write the report or table to this file.",
)
@_quiet_option
def solve(path: pathlib.Path, format_: str, output: pathlib.Path | None, quiet: bool) -> None:
    """Integrate the initial value problem of problem file <path>.

    Args:
        path: The problem file.
        format_: The output format.
        output: Optional file receiving the output.
        quiet: Whether to suppress the report.
    """

    def body() -> Outcome:
        """Integrate.

        Raises:
            ProblemFileError: If the file has no initial value problem.

        Returns:
            The trajectory.
        """
        loaded = problem.load(path)
        if loaded.ivp is None:
            raise ProblemFileError("Problem file has no ivp section", field="ivp")
        trajectory = solver.integrate(loaded.ivp)
        results = {"trajectory": report.trajectory_to_dict(trajectory)}
        table = (
            report.trajectory_table(trajectory) if format_ == OutputFormat.TABULAR else None
        )
        return Outcome(loaded.config_hash, results, table=table)

    _run(f"solve {path}", body, quiet, output)


@main.command(name="verify")
@click.argument("path", type=PATH_TYPE)
@click.argument("trajectory", type=PATH_TYPE)
@click.option("--query", default=None, help="The verify query supplying samples and tolerance.")
@click.option("--samples", type=click.IntRange(min=1), default=None, help="Number of samples.")
@_tolerance_option
@_seed_option
@_quiet_option
def verify(  # pylint: disable=too-many-arguments
    path: pathlib.Path,
    trajectory: pathlib.Path,
    query: str | None,
    samples: int | None,
    tolerance: float | None,
    seed: int | None,
    quiet: bool,
) -> None:
    """Check that trajectory file <trajectory> solves the inclusion of problem file <path>.

    Exits with 1 when the residual check fails.

    Args:
        path: The problem file.
        trajectory: A solve report or trajectory document.
        query: The verify query name.
        samples: Number of sample times.
        tolerance: Pass tolerance.
        seed: The sampling seed.
        quiet: Whether to suppress the report.
    """

    def body() -> Outcome:
        """Check the trajectory.

        Returns:
            The residual report.
        """
        loaded = problem.load(path)
        block = (
            loaded.query(query, QueryKind.VERIFY)
            if query
            else problem.Query(name="", kind=QueryKind.VERIFY)
        )
        event_tolerance = (
            loaded.ivp.event_tolerance
            if loaded.ivp is not None
            else config.SOLVER_DEFAULTS.event_tolerance
        )
        residual = solver.verify_inclusion(
            report.load_trajectory(trajectory),
            loaded.filippov_map(seed=seed),
            samples=samples or block.samples,
            tol=tolerance or block.tolerance,
            event_tolerance=event_tolerance,
            seed=loaded.seed if seed is None else seed,
        )
        code = ExitCode.OK if residual.passed else ExitCode.PROPERTY_FAILURE
        return Outcome(loaded.config_hash, {"residual": report.residual_to_dict(residual)}, code)

    _run(f"verify {path} {trajectory}", body, quiet)
