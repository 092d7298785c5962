"""
Run-level schemas: the resolved CLI configuration echoed to the manifest,
the simulation configuration and endpoint event specifications.
"""

import re
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from core.validation import ValidationFields, ValidationMessages
from exceptions.simulation_exceptions import InvalidEventSpec


class SimConfig(BaseModel):
    """Euler-Maruyama configuration for one value of epsilon"""
    epsilon: float = ValidationFields.epsilon()
    substeps: int = Field(20, ge=20, description="Steps per fast time unit (M)")
    seed: int = Field(0, ge=0, lt=2 ** 64, description="64-bit seed")
    path_count: int = ValidationFields.count("Number of simulated paths", 1000)
    record_stride: int = ValidationFields.count("Keep every k-th time node (0: endpoints only)", 0, minimum=0)
    h: Optional[float] = Field(None, gt=0, description="Override for h(eps)")
    dt_cap: float = ValidationFields.positive("Upper bound on the time step", 1.0 / 1024.0)
    workers: int = ValidationFields.count("Worker threads", 1)
    block_size: int = ValidationFields.count("Paths per block", 512)
    y_power: Optional[float] = Field(None, ge=0, description="Accumulate the time integral of |Y|^power")

    class Config:
        extra = "forbid"


_EVENT = re.compile(
    r"^\s*(?P<lhs>.+?)\s*(?P<op>>=|<=)\s*(?P<rhs>[-+]?(?:inf|\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?))\s*$"
)
_COMPONENT = re.compile(r"^eta([1-9][0-9]*)$")


class EventSpec(BaseModel):
    """Endpoint half-space {l . eta_1 >= a} or {l . eta_1 <= a}"""
    functional: Tuple[float, ...]
    threshold: float
    direction: Literal[">=", "<="] = ">="

    @field_validator("functional")
    @classmethod
    def functional_nonzero(cls, v):
        if not v or all(component == 0 for component in v):
            raise ValueError(ValidationMessages.NONZERO_FUNCTIONAL)
        return v

    @classmethod
    def parse(cls, spec: str, dimension: int) -> "EventSpec":
        """
        Accepts "l1,l2,...,ln.eta>=a" or "etaK>=a" (and the <= forms);
        thresholds may be +-inf.
        """
        match = _EVENT.match(spec or "")
        if not match:
            raise InvalidEventSpec(f"Cannot parse event {spec!r}", spec)
        lhs, op, rhs = match.group("lhs"), match.group("op"), match.group("rhs")
        component = _COMPONENT.match(lhs)
        if component:
            index = int(component.group(1))
            if index > dimension:
                raise InvalidEventSpec(f"eta{index} exceeds slow dimension {dimension}", spec)
            functional = [0.0] * dimension
            functional[index - 1] = 1.0
        elif lhs.endswith(".eta"):
            try:
                functional = [float(item) for item in lhs[: -len(".eta")].split(",")]
            except ValueError:
                raise InvalidEventSpec(f"Cannot read the linear form in {spec!r}", spec)
            if len(functional) != dimension:
                raise InvalidEventSpec(
                    f"Linear form has {len(functional)} entries, slow dimension is {dimension}", spec
                )
        elif lhs == "eta" and dimension == 1:
            functional = [1.0]
        else:
            raise InvalidEventSpec(f"Left-hand side {lhs!r} is not a linear form of eta", spec)
        try:
            return cls(functional=tuple(functional), threshold=float(rhs), direction=op)
        except ValueError as exc:
            raise InvalidEventSpec(str(exc), spec)

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == ">=" else -1.0

    def text(self) -> str:
        form = ",".join(repr(v) for v in self.functional)
        return f"{form}.eta{self.direction}{self.threshold!r}"


class RunConfig(BaseModel):
    """
    Fully resolved CLI configuration. Written to manifest.txt by every run and
    accepted back through --config.
    """
    command: str
    model: str = "example1"
    model_file: Optional[str] = None
    regime: Optional[int] = Field(None, ge=1, le=2, description="Regime selector for builtins offering both")
    overrides: Dict[str, float] = Field(default_factory=dict)
    force: bool = False
    seed: int = Field(0, ge=0, lt=2 ** 64)
    output_dir: str = "out"

    # numerics
    grid_nodes: Optional[int] = Field(None, ge=8)
    half_width: Optional[float] = Field(None, gt=0)
    stencil_order: Optional[int] = None
    path_nodes: Optional[int] = Field(None, ge=64)
    solver: Literal["auto", "quadrature", "fd"] = "auto"

    # condition checks
    r: Optional[float] = Field(None, ge=0)
    qb: Optional[float] = Field(None, ge=0)
    qc: Optional[float] = Field(None, ge=0)
    qsigma: Optional[float] = Field(None, ge=0)
    scan_radius: Optional[float] = Field(None, gt=0)

    # analysis
    x: Optional[List[float]] = None
    x_grid: Optional[str] = None
    eta: Optional[List[float]] = None
    beta: Optional[List[float]] = None
    target: Optional[List[float]] = None
    xi_file: Optional[str] = None

    # simulation and estimation
    eps: Optional[List[float]] = None
    substeps: int = Field(20, ge=20)
    paths: int = Field(1000, ge=1)
    workers: int = Field(1, ge=1)
    record_stride: int = Field(0, ge=0)
    h: Optional[float] = Field(None, gt=0)
    control: Optional[List[float]] = None
    event: Optional[str] = None
    method: Literal["plain", "is", "both"] = "both"
    summary: Literal["paths", "quantiles"] = "quantiles"
    weights: bool = Field(False, description="Write per-path importance weights")
    moment_power: Optional[float] = Field(None, ge=0, description="Run the fast-moment diagnostic with this power")

    @field_validator("stencil_order")
    @classmethod
    def stencil_supported(cls, v):
        if v is not None and v not in (2, 4):
            raise ValueError("Stencil order must be 2 or 4")
        return v

    @field_validator("eps")
    @classmethod
    def eps_range(cls, v):
        if v is not None and any(not 0 < e < 1 for e in v):
            raise ValueError(ValidationMessages.EPSILON_RANGE)
        return v

    @model_validator(mode="after")
    def model_source(self):
        if self.model == "custom" and not self.model_file:
            raise ValueError("A custom model needs --model-file")
        return self

    class Config:
        extra = "forbid"


def parse_grid(spec: str) -> List[float]:
    """Parse start:stop:count into evenly spaced values"""
    parts = spec.split(":") if spec else []
    if len(parts) != 3:
        raise ValueError(ValidationMessages.GRID_SPEC)
    start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise ValueError(ValidationMessages.GRID_SPEC)
    if count == 1:
        return [start]
    step = (stop - start) / (count - 1)
    return [start + k * step for k in range(count)]
