"""
Exceptions raised by the path simulator and the rare-event estimators.
"""

from exceptions.base_exceptions import ValidationError, NumericalError


class NumericalBlowUp(NumericalError):
    """Raised when a simulated fast component leaves the admissible range"""

    def __init__(self, message: str, step: int = None, time: float = None, value: float = None):
        self.step = step
        self.time = time
        self.value = value
        super().__init__(message, "NUMERICAL_BLOW_UP")


class WeightOverflow(NumericalError):
    """Raised when a Girsanov log-weight exceeds the overflow bound"""

    def __init__(self, message: str, log_weight: float = None, bound: float = None):
        self.log_weight = log_weight
        self.bound = bound
        super().__init__(message, "WEIGHT_OVERFLOW")


class MinimizationFailed(NumericalError):
    """Raised when the dominant-point or endpoint minimization cannot be solved"""

    def __init__(self, message: str, target=None):
        self.target = target
        super().__init__(message, "MINIMIZATION_FAILED")


class InvalidEventSpec(ValidationError):
    """Raised when an event specification cannot be parsed or is degenerate"""

    def __init__(self, message: str, spec: str = None):
        self.spec = spec
        super().__init__(message, "INVALID_EVENT_SPEC")
