# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Utilities used by the app."""

import functools
import logging
import time
from typing import Callable, Optional, TypeVar

from typing_extensions import ParamSpec

logger = logging.getLogger(__name__)


# Parameters of the function decorated with timed
ParamT = ParamSpec("ParamT")
# Return type of the function decorated with timed
ReturnT = TypeVar("ReturnT")


def timed(
    label: str = "",
    local_logger: Optional[logging.Logger] = logger,
) -> Callable[[Callable[ParamT, ReturnT]], Callable[ParamT, tuple[ReturnT, float]]]:
    """Parameterize the decorator measuring the wall time of functions.

    Args:
        label: Name used in the log line, defaults to the function name.
        local_logger: Logger for logging, None to disable logging.

    Returns:
        The function decorator returning the result together with the elapsed seconds.
    """

    def timed_decorator(
        func: Callable[ParamT, ReturnT],
    ) -> Callable[ParamT, tuple[ReturnT, float]]:
        """Decorate function with wall time measurement.

        Args:
            func: The function to decorate.

        Returns:
            The resulting function returning (result, elapsed seconds).
        """

        @functools.wraps(func)
        def fn_with_timing(*args: ParamT.args, **kwargs: ParamT.kwargs) -> tuple[ReturnT, float]:
            """Wrap the function with a wall clock.

            Args:
                args: The placeholder for decorated function's positional arguments.
                kwargs: The placeholder for decorated function's key word arguments.

            Returns:
                Original return value of the decorated function and the elapsed seconds.
            """
            start = time.perf_counter()
            result = func(*args, **kwargs)
            elapsed = time.perf_counter() - start
            if local_logger is not None:
                local_logger.info("%s finished in %.3f seconds.", label or func.__name__, elapsed)
            return result, elapsed

        return fn_with_timing

    return timed_decorator
