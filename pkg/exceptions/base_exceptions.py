"""
Base exception classes for the library and CLI.
New exception families subclass one of the category bases below so the
CLI handlers can map them to exit codes without knowing every concrete type.
"""

from typing import Any, Dict, Optional


class BaseApplicationException(Exception):
    """Base class for all application exceptions"""

    def __init__(self, message: str, error_code: str = None):
        self.message = message
        self.error_code = error_code or self.__class__.__name__
        super().__init__(self.message)

    def context(self) -> Dict[str, Any]:
        """Structured attributes attached by subclasses (for reports)"""
        return {
            key: value for key, value in vars(self).items()
            if key not in ("message", "error_code")
        }


class ValidationError(BaseApplicationException):
    """Base class for malformed input: bad model files, flags, grids"""
    pass


class BusinessRuleError(BaseApplicationException):
    """Base class for violated mathematical preconditions"""
    pass


class NotFoundError(BaseApplicationException):
    """Base class for unknown models, parameters or artifacts"""
    pass


class NumericalError(BaseApplicationException):
    """Base class for solver, quadrature or simulation breakdowns"""

    def __init__(self, message: str, error_code: str = None, detail: Optional[Dict[str, Any]] = None):
        self.detail = detail or {}
        super().__init__(message, error_code)
