# Schemas package for Pydantic models
from .model_config import Dimensions, GrowthErgodicityParams, ModelFileSchema, RegimeScaling, ScalingFamily
from .reports import ConditionReport, ConditionVerdict
from .results import EstimatorResult, LimitCheckReport, MomentDiagnostic
from .run_config import EventSpec, RunConfig, SimConfig

__all__ = [
    "Dimensions",
    "GrowthErgodicityParams",
    "ModelFileSchema",
    "RegimeScaling",
    "ScalingFamily",
    "ConditionReport",
    "ConditionVerdict",
    "EstimatorResult",
    "LimitCheckReport",
    "MomentDiagnostic",
    "EventSpec",
    "RunConfig",
    "SimConfig",
]
