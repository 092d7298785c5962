# CLI package
from .analysis_commands import action, averaged, invariant, minimize, poisson, rate
from .simulation_commands import estimate, limit_check, simulate
from .validation_commands import validate

COMMANDS = [validate, invariant, poisson, averaged, rate, action, minimize, simulate, limit_check, estimate]

__all__ = [
    "COMMANDS",
    "validate",
    "invariant",
    "poisson",
    "averaged",
    "rate",
    "action",
    "minimize",
    "simulate",
    "limit_check",
    "estimate",
]
