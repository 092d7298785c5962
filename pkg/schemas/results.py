"""
Result documents produced by the estimators and simulation cross-checks.
"""

import math
from typing import Any, Iterator, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class EstimatorResult(BaseModel):
    """Monte Carlo probability estimate with its uncertainty"""
    method: Literal["plain", "is"]
    estimate: float = Field(..., ge=0, le=1)
    std_error: float = Field(..., ge=0)
    ci_low: float
    ci_high: float
    sample_count: int = Field(..., ge=1)
    second_moment: float = Field(..., ge=0)
    relative_error: float
    epsilon: float
    h: float
    zero_hits: bool = False
    s_star: Optional[float] = None
    mdp_approx: Optional[float] = None
    log_asymptote: Optional[float] = Field(None, description="-log(estimate)/h^2")
    weight_mean: Optional[float] = None
    weight_std_error: Optional[float] = None
    unvalidated: bool = False

    @model_validator(mode="after")
    def interval_contains_estimate(self):
        if not self.ci_low <= self.estimate <= self.ci_high:
            raise ValueError("Confidence interval must contain the estimate")
        return self

    def overlaps(self, other: "EstimatorResult") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high

    def key_values(self) -> Iterator[Tuple[str, Any]]:
        prefix = self.method
        for name, value in self.model_dump().items():
            if name == "method" or value is None:
                continue
            yield f"{prefix}.{name}", value


class LimitCheckReport(BaseModel):
    """Gap between simulated mean deviations and the controlled limit ODE"""
    control: List[float]
    epsilons: List[float]
    gaps: List[float]
    std_errors: List[float]
    psi_final: List[float]
    monotone: bool
    passed: bool

    def key_values(self) -> Iterator[Tuple[str, Any]]:
        yield "passed", self.passed
        yield "monotone", self.monotone
        yield "control", ",".join(repr(v) for v in self.control)
        yield "psi_final", ",".join(repr(v) for v in self.psi_final)
        for eps, gap, se in zip(self.epsilons, self.gaps, self.std_errors):
            yield f"eps.{eps!r}.gap", gap
            yield f"eps.{eps!r}.std_error", se


class MomentDiagnostic(BaseModel):
    """Monte Carlo estimates of E int_0^1 |Y_s|^power ds across epsilon"""
    power: float
    epsilons: List[float]
    estimates: List[float]
    std_errors: List[float]
    slope: float = Field(..., description="Regression slope of log estimate on -log epsilon")
    flagged: bool

    @property
    def finite(self) -> bool:
        return all(math.isfinite(v) for v in self.estimates)
