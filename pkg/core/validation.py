"""
Validation constants shared by schemas, services and the CLI.
Centralized so that every tolerance quoted in a report comes from one place.
"""

from pydantic import Field


class ValidationLimits:
    """Centralized numerical limits and tolerances"""

    # Grids
    MIN_GRID_NODES: int = 8
    UNIFORMITY_TOLERANCE: float = 1e-12
    TRUSTED_BOUNDARY_CELLS: int = 2
    TRUSTED_DENSITY_FRACTION: float = 1e-5
    DEGENERATE_DIFFUSION_FRACTION: float = 1e-2

    # Invariant densities
    NORMALIZATION_TOLERANCE: float = 1e-10
    TAIL_FIT_NODES: int = 6
    TAIL_RATIO_TOLERANCE: float = 1e-10

    # Condition scans
    GROWTH_SLOPE_TOLERANCE: float = 0.1
    DEFAULT_SCAN_RADIUS: float = 1e3
    DEFAULT_SCAN_POINTS: int = 40

    # Averaged trajectory
    MIN_PATH_NODES: int = 64
    BLOW_UP_BOUND: float = 1e6
    MAX_XBAR_REFINEMENTS: int = 6
    LIPSCHITZ_SAMPLES: int = 17
    MAX_DRIFT_JACOBIAN: float = 1e6

    # Symmetry and definiteness
    SYMMETRY_TOLERANCE: float = 1e-12

    # Monte Carlo
    CONFIDENCE_LEVEL: float = 0.95
    ZERO_HIT_UPPER: float = 3.0
    LIMIT_CHECK_RELATIVE_GAP: float = 0.05


class ValidationMessages:
    """Centralized validation error messages"""

    EPSILON_RANGE: str = "epsilon must lie strictly between 0 and 1"
    QH_RANGE: str = "q_h must lie strictly between 0 and 1/2"
    BETA_ORDER: str = "beta1 must not exceed beta2"
    REGIME1_P: str = "Regime 1 requires p > 1 in the scaling family"
    REGIME2_P: str = "Regime 2 requires p = 1 in the scaling family"
    REGIME2_GAMMA: str = "Regime 2 requires gamma > 0 (directly or from the scaling family)"
    NONZERO_FUNCTIONAL: str = "Event functional must not be identically zero"
    GRID_SPEC: str = "Grid must be written as start:stop:count"


class ValidationFields:
    """Reusable field definitions with validation"""

    @staticmethod
    def exponent(description: str = "Nonnegative growth exponent", default: float = 0.0) -> Field:
        """Growth or recurrence exponent"""
        return Field(default, ge=0, description=description)

    @staticmethod
    def positive(description: str, default=...) -> Field:
        """Strictly positive real"""
        return Field(default, gt=0, description=description)

    @staticmethod
    def count(description: str, default=..., minimum: int = 1) -> Field:
        """Integer count with a lower bound"""
        return Field(default, ge=minimum, description=description)

    @staticmethod
    def epsilon(description: str = "Scale parameter epsilon in (0, 1)") -> Field:
        """Scale parameter"""
        return Field(..., gt=0, lt=1, description=description)
