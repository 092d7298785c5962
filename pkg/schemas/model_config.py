"""
Schemas describing a slow-fast model: dimensions, growth and ergodicity
exponents, regime and scaling, and the layout of a model file.
"""

import math
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from core.validation import ValidationFields, ValidationMessages


class Dimensions(BaseModel):
    """Slow, fast and Brownian dimensions"""
    n: int = ValidationFields.count("Slow dimension", 1)
    d: int = ValidationFields.count("Fast dimension", 1)
    m: int = ValidationFields.count("Brownian dimension of each of W and B", 1)

    class Config:
        frozen = True


class GrowthErgodicityParams(BaseModel):
    """Declared growth exponents, recurrence constants and ellipticity bounds"""
    q_b: float = ValidationFields.exponent("Growth exponent of b in |y|")
    q_c: float = ValidationFields.exponent("Growth exponent of c in |y|")
    q_sigma: float = ValidationFields.exponent("Growth exponent of sigma in |y|")
    r: float = ValidationFields.exponent("Recurrence exponent", 1.0)
    recurrence_gamma: float = ValidationFields.positive("Recurrence constant Gamma", 0.4)
    recurrence_radius: float = Field(1.0, ge=0, description="Radius R beyond which recurrence holds")
    beta1: float = ValidationFields.positive("Lower ellipticity bound", 1.0)
    beta2: float = ValidationFields.positive("Upper ellipticity bound", 1.0)
    strong_solution_declared: bool = Field(True, description="Unique strong solution asserted by the user")

    @model_validator(mode="after")
    def beta_order(self):
        if self.beta1 > self.beta2:
            raise ValueError(ValidationMessages.BETA_ORDER)
        return self

    class Config:
        json_schema_extra = {
            "example": {"q_b": 0.0, "q_c": 0.0, "q_sigma": 0.0, "r": 1.0,
                        "recurrence_gamma": 0.4, "recurrence_radius": 1.0,
                        "beta1": 1.0, "beta2": 1.0, "strong_solution_declared": True}
        }


class ScalingFamily(BaseModel):
    """Power family delta(eps) = c_delta * eps^p and h(eps) = eps^(-q_h)"""
    c_delta: float = ValidationFields.positive("Prefactor of delta(eps)")
    p: float = ValidationFields.positive("Exponent of delta(eps)")
    q_h: float = Field(..., gt=0, lt=0.5, description="Exponent of h(eps) = eps^(-q_h)")

    def delta(self, epsilon: float) -> float:
        return self.c_delta * epsilon ** self.p

    def h(self, epsilon: float) -> float:
        return epsilon ** (-self.q_h)

    def exact(self, name: str) -> Fraction:
        """Exact rational value of a field, read from its decimal representation"""
        return Fraction(str(getattr(self, name)))


class RegimeScaling(BaseModel):
    """
    Regime 1 (eps/delta -> infinity) carries j1; Regime 2 (eps/delta -> gamma)
    carries gamma and j2. Any of these may be derived from the scaling family.
    """
    regime: Literal[1, 2]
    j1: Optional[float] = Field(None, ge=0, description="Regime 1 limit constant")
    gamma: Optional[float] = Field(None, gt=0, description="Regime 2 limit of eps/delta")
    j2: Optional[float] = Field(None, description="Regime 2 limit constant")
    scaling_family: Optional[ScalingFamily] = None

    @model_validator(mode="after")
    def regime_consistency(self):
        family = self.scaling_family
        if self.regime == 1:
            if family is not None and family.exact("p") <= 1:
                raise ValueError(ValidationMessages.REGIME1_P)
        else:
            if family is not None and family.exact("p") != 1:
                raise ValueError(ValidationMessages.REGIME2_P)
            if self.gamma is None and family is None:
                raise ValueError(ValidationMessages.REGIME2_GAMMA)
        for name in ("j1", "gamma", "j2"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        return self

    @property
    def effective_gamma(self) -> Optional[float]:
        if self.regime == 1:
            return None
        if self.gamma is not None:
            return self.gamma
        return 1.0 / self.scaling_family.c_delta


class FastSpace(BaseModel):
    """State space of the fast variable"""
    kind: Literal["line", "torus", "half_line"] = "line"
    period: float = ValidationFields.positive("Torus period", 1.0)
    separable: bool = Field(False, description="Fast generator splits coordinate-wise")


Expression = Union[str, float, int]
ExpressionArraySpec = Union[Expression, List[Expression], List[List[Expression]]]


class CoefficientsSchema(BaseModel):
    """Coefficient expressions in the grammar of utils.expressions"""
    b: ExpressionArraySpec = 0
    c: ExpressionArraySpec = 0
    sigma: ExpressionArraySpec = 0
    f: ExpressionArraySpec = 0
    g: ExpressionArraySpec = 0
    tau1: ExpressionArraySpec = 0
    tau2: ExpressionArraySpec = 0
    grad_b: Optional[ExpressionArraySpec] = None
    grad_c: Optional[ExpressionArraySpec] = None
    g_bound: Optional[float] = Field(None, ge=0, description="Declared uniform bound of |g|")

    class Config:
        extra = "forbid"


class ModelFileSchema(BaseModel):
    """Layout of a custom model file"""
    name: str = "custom"
    dimensions: Dimensions = Dimensions()
    coefficients: CoefficientsSchema
    exponents: GrowthErgodicityParams = GrowthErgodicityParams()
    regime: RegimeScaling
    fast_space: FastSpace = FastSpace()
    parameters: Dict[str, float] = Field(default_factory=dict)
    initial: Dict[str, List[float]] = Field(default_factory=dict)
    degenerate_ok: bool = False

    @field_validator("initial")
    @classmethod
    def initial_keys(cls, v: Dict[str, Any]):
        unknown = set(v) - {"x0", "y0"}
        if unknown:
            raise ValueError(f"Unknown initial-condition keys: {sorted(unknown)}")
        return v

    class Config:
        extra = "forbid"
