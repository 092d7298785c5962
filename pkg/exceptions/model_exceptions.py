"""
Exceptions raised while defining, loading or validating slow-fast models.
"""

from typing import Any, Dict, Optional

from exceptions.base_exceptions import ValidationError, BusinessRuleError, NotFoundError


class InvalidModelDefinition(ValidationError):
    """Raised when a model definition is structurally inconsistent"""

    def __init__(self, message: str, field: str = None):
        self.field = field
        super().__init__(message, "INVALID_MODEL_DEFINITION")


class ExpressionSyntaxError(ValidationError):
    """Raised when a coefficient expression cannot be compiled"""

    def __init__(self, message: str, expression: str = None, token: str = None):
        self.expression = expression
        self.token = token
        super().__init__(message, "EXPRESSION_SYNTAX_ERROR")


class ModelNotFoundError(NotFoundError):
    """Raised when a builtin model name is not registered"""

    def __init__(self, message: str, name: str = None):
        self.name = name
        super().__init__(message, "MODEL_NOT_FOUND")


class UnknownParameterError(NotFoundError):
    """Raised when an override names a parameter the model does not have"""

    def __init__(self, message: str, parameter: str = None):
        self.parameter = parameter
        super().__init__(message, "UNKNOWN_PARAMETER")


class EmptyProbeSet(ValidationError):
    """Raised when a scan is asked to run without any slow states"""

    def __init__(self, message: str = "At least one slow state x is required"):
        super().__init__(message, "EMPTY_PROBE_SET")


class DegenerateScan(ValidationError):
    """Raised when a scan box or radius range has no interior"""

    def __init__(self, message: str, bounds: Any = None):
        self.bounds = bounds
        super().__init__(message, "DEGENERATE_SCAN")


class DivergentLimit(BusinessRuleError):
    """Raised when a scale-ratio limit is infinite"""

    def __init__(self, message: str, exponent_gap: float = None):
        self.exponent_gap = exponent_gap
        super().__init__(message, "DIVERGENT_LIMIT")


class MissingScalingFamily(ValidationError):
    """Raised when an operation needs delta(eps) or h(eps) and none is declared"""

    def __init__(self, message: str, quantity: str = None):
        self.quantity = quantity
        super().__init__(message, "MISSING_SCALING_FAMILY")


class UnsupportedDimension(ValidationError):
    """Raised when an operation only supports a restricted fast dimension"""

    def __init__(self, message: str, dimension: int = None):
        self.dimension = dimension
        super().__init__(message, "UNSUPPORTED_DIMENSION")


class ConditionCheckFailed(BusinessRuleError):
    """Raised when a pipeline is refused because the condition report failed"""

    def __init__(self, message: str, failures: Optional[Dict[str, Any]] = None):
        self.failures = failures or {}
        super().__init__(message, "CONDITION_CHECK_FAILED")
