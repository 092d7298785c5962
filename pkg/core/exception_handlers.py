"""
Exception handlers for the command-line application.
Each handler logs the failure category, reports it on stderr and returns the
process exit code; new handlers are added to EXCEPTION_HANDLERS without
modifying existing ones.
"""

import logging
from typing import Callable, List, Tuple, Type

import click

from exceptions.base_exceptions import (
    BaseApplicationException,
    BusinessRuleError,
    NotFoundError,
    NumericalError,
    ValidationError,
)
from exceptions.model_exceptions import ConditionCheckFailed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_VALIDATION_FAILED = 2
EXIT_USAGE = 64


def _report(kind: str, exc: BaseApplicationException):
    click.echo(f"error [{exc.error_code}] ({kind}): {exc.message}", err=True)


def usage_error_handler(exc: click.UsageError) -> int:
    """Malformed flags or arguments"""
    logger.warning(f"Usage error: {exc.format_message()}")
    click.echo(f"usage error: {exc.format_message()}", err=True)
    return EXIT_USAGE


def condition_check_failed_handler(exc: ConditionCheckFailed) -> int:
    """Pipeline refused because the model failed its condition report"""
    logger.warning(f"Condition check failed: {exc.message}")
    _report("condition_check_failed", exc)
    for name in exc.failures:
        click.echo(f"  failed: {name}", err=True)
    return EXIT_VALIDATION_FAILED


def validation_error_handler(exc: ValidationError) -> int:
    """Bad model files, grids or event specifications"""
    logger.warning(f"Validation error: {exc.message}")
    _report("validation_error", exc)
    return EXIT_RUNTIME_ERROR


def business_rule_error_handler(exc: BusinessRuleError) -> int:
    """Violated mathematical preconditions"""
    logger.warning(f"Business rule violation: {exc.message}")
    _report("business_rule_error", exc)
    return EXIT_RUNTIME_ERROR


def not_found_error_handler(exc: NotFoundError) -> int:
    """Unknown models, parameters or files"""
    logger.info(f"Resource not found: {exc.message}")
    _report("not_found_error", exc)
    return EXIT_RUNTIME_ERROR


def numerical_error_handler(exc: NumericalError) -> int:
    """Solver, quadrature or simulation breakdowns"""
    logger.error(f"Numerical error: {exc.message} {exc.context()}")
    _report("numerical_error", exc)
    return EXIT_RUNTIME_ERROR


def base_application_exception_handler(exc: BaseApplicationException) -> int:
    """Handle all remaining application-specific exceptions"""
    logger.error(f"Application exception: {exc.message}", exc_info=exc)
    _report("application_error", exc)
    return EXIT_RUNTIME_ERROR


def general_exception_handler(exc: Exception) -> int:
    """Handle all unhandled exceptions"""
    logger.error(f"Unhandled exception: {exc}", exc_info=exc)
    click.echo(f"internal error: {exc}", err=True)
    return EXIT_RUNTIME_ERROR


# Most specific first
EXCEPTION_HANDLERS: List[Tuple[Type[BaseException], Callable]] = [
    (click.UsageError, usage_error_handler),
    (ConditionCheckFailed, condition_check_failed_handler),
    (ValidationError, validation_error_handler),
    (BusinessRuleError, business_rule_error_handler),
    (NotFoundError, not_found_error_handler),
    (NumericalError, numerical_error_handler),
    (BaseApplicationException, base_application_exception_handler),
    (Exception, general_exception_handler),
]


def handle_exception(exc: BaseException) -> int:
    """Map an exception to an exit code through the first matching handler"""
    for exception_type, handler in EXCEPTION_HANDLERS:
        if isinstance(exc, exception_type):
            return handler(exc)
    raise exc
