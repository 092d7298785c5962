# Exceptions package
from .base_exceptions import BaseApplicationException, ValidationError, BusinessRuleError, NotFoundError, NumericalError
from .model_exceptions import (
    InvalidModelDefinition,
    ExpressionSyntaxError,
    ModelNotFoundError,
    UnknownParameterError,
    EmptyProbeSet,
    DegenerateScan,
    DivergentLimit,
    MissingScalingFamily,
    UnsupportedDimension,
    ConditionCheckFailed,
)
from .numerics_exceptions import (
    TruncationTooSmall,
    NonEllipticDiffusion,
    DegenerateDiffusion,
    GridTooCoarse,
    GridMismatch,
    TailDominates,
    FredholmViolation,
    CenteringViolation,
    SingularSystem,
    MissingCellSolution,
    MissingCorrector,
    UncertifiedCorrector,
    SingularQ,
    BlowUp,
    NonLipschitzDrift,
)
from .simulation_exceptions import NumericalBlowUp, WeightOverflow, MinimizationFailed, InvalidEventSpec

__all__ = [
    "BaseApplicationException",
    "ValidationError",
    "BusinessRuleError",
    "NotFoundError",
    "NumericalError",
    "InvalidModelDefinition",
    "ExpressionSyntaxError",
    "ModelNotFoundError",
    "UnknownParameterError",
    "EmptyProbeSet",
    "DegenerateScan",
    "DivergentLimit",
    "MissingScalingFamily",
    "UnsupportedDimension",
    "ConditionCheckFailed",
    "TruncationTooSmall",
    "NonEllipticDiffusion",
    "DegenerateDiffusion",
    "GridTooCoarse",
    "GridMismatch",
    "TailDominates",
    "FredholmViolation",
    "CenteringViolation",
    "SingularSystem",
    "MissingCellSolution",
    "MissingCorrector",
    "UncertifiedCorrector",
    "SingularQ",
    "BlowUp",
    "NumericalBlowUp",
    "WeightOverflow",
    "MinimizationFailed",
    "InvalidEventSpec",
]
