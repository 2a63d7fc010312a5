"""Error types and standardized error handling for the library and CLI."""

import logging
from functools import wraps
from typing import Any, Callable, Optional, Type, TypeVar, Union

from pydantic import ValidationError

F = TypeVar("F", bound=Callable[..., Any])

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class CausalCpdError(Exception):
    """Base class for every error raised by causalcpd."""

    exit_code = EXIT_INTERNAL


class ConfigurationError(CausalCpdError, ValueError):
    """Invalid parameters or configuration file."""

    exit_code = EXIT_USAGE


class DataError(CausalCpdError, ValueError):
    """Input data violates the dataset contract (parse, domain, shape)."""

    exit_code = EXIT_DATA


class ArtifactIOError(CausalCpdError, OSError):
    """Reading or writing an artifact failed."""

    exit_code = EXIT_DATA


class InfeasibleSpecError(CausalCpdError, ValueError):
    """Generator arguments cannot produce a valid spec."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, best_divergence: Optional[float] = None):
        super().__init__(message)
        self.best_divergence = best_divergence


class DiscoveryError(DataError):
    """Parent discovery cannot run on the given data (e.g. too short)."""


class EstimationError(CausalCpdError, ArithmeticError):
    """A divergence estimate was not finite."""


class NoUsableSegmentsError(CausalCpdError, ValueError):
    """Every divergence series is empty, so no argmax exists."""

    exit_code = EXIT_DATA


class ErrorHandlingConfig:
    """Configuration for error handling."""

    RAISE_ERRORS = True  # Whether to re-raise errors after handling


def exit_code_for(e: BaseException) -> int:
    """Map an exception onto the CLI exit-code contract."""
    if isinstance(e, CausalCpdError):
        return e.exit_code
    if isinstance(e, ValidationError):
        return EXIT_USAGE
    return EXIT_INTERNAL


def handle_data_error(e: CausalCpdError, context: str = "") -> None:
    """
    Standard handling for expected library errors (bad data, bad config).

    Args:
        e: The library error
        context: Additional context about where the error occurred
    """
    error_msg = f"{type(e).__name__}: {e}"
    if context:
        error_msg = f"{context}: {error_msg}"

    logger.error(error_msg)


def handle_general_error(
    e: Exception, context: str = "", show_traceback: bool = True
) -> None:
    """
    Standard handling for unexpected errors.

    Args:
        e: The exception
        context: Additional context about where the error occurred
        show_traceback: Whether to include the traceback in the log
    """
    error_msg = f"Error: {type(e).__name__}: {e}"
    if context:
        error_msg = f"{context}: {error_msg}"

    logger.error(error_msg, exc_info=show_traceback)


def with_error_handling(
    context: str = "",
    catch_exceptions: Union[Type[Exception], tuple[Type[Exception], ...]] = Exception,
    show_traceback: bool = True,
    raise_error: Optional[bool] = None,
) -> Callable[[F], F]:
    """
    Decorator for standardized error handling.

    Library errors are logged without a traceback; anything else is logged
    with one.

    Args:
        context: Context description for error messages
        catch_exceptions: Exception type(s) to catch
        show_traceback: Whether to include traceback in logs for unexpected errors
        raise_error: Whether to re-raise errors (overrides global setting)

    Returns:
        Decorated function with error handling
    """

    def decorator(func: F) -> F:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            try:
                return func(*args, **kwargs)
            except CausalCpdError as e:
                handle_data_error(e, context)
                if raise_error or (
                    raise_error is None and ErrorHandlingConfig.RAISE_ERRORS
                ):
                    raise
            except catch_exceptions as e:
                handle_general_error(e, context, show_traceback)
                if raise_error or (
                    raise_error is None and ErrorHandlingConfig.RAISE_ERRORS
                ):
                    raise

        return wrapper  # type: ignore

    return decorator
