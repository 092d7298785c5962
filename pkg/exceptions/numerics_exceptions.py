"""
Exceptions raised by the invariant-density, Poisson, averaging and rate solvers.
"""

from exceptions.base_exceptions import ValidationError, BusinessRuleError, NumericalError


class TruncationTooSmall(NumericalError):
    """Raised when the estimated mass outside the truncated grid is too large"""

    def __init__(self, message: str, mass_defect: float = None, bound: float = None):
        self.mass_defect = mass_defect
        self.bound = bound
        super().__init__(message, "TRUNCATION_TOO_SMALL")


class NonEllipticDiffusion(BusinessRuleError):
    """Raised when the fast diffusion vanishes or drops below the declared bound"""

    def __init__(self, message: str, y: float = None, value: float = None):
        self.y = y
        self.value = value
        super().__init__(message, "NON_ELLIPTIC_DIFFUSION")


class DegenerateDiffusion(BusinessRuleError):
    """Raised when a Poisson solve meets a nonpositive diffusion at an interior node"""

    def __init__(self, message: str, y: float = None, value: float = None):
        self.y = y
        self.value = value
        super().__init__(message, "DEGENERATE_DIFFUSION")


class GridTooCoarse(ValidationError):
    """Raised when a grid has too few nodes for the stencils"""

    def __init__(self, message: str, nodes: int = None):
        self.nodes = nodes
        super().__init__(message, "GRID_TOO_COARSE")


class GridMismatch(ValidationError):
    """Raised when gridded data does not live on the expected grid"""

    def __init__(self, message: str, expected=None, received=None):
        self.expected = expected
        self.received = received
        super().__init__(message, "GRID_MISMATCH")


class TailDominates(NumericalError):
    """Raised when a moment integrand has not decayed at the truncation"""

    def __init__(self, message: str, order: float = None, tail_ratio: float = None):
        self.order = order
        self.tail_ratio = tail_ratio
        super().__init__(message, "TAIL_DOMINATES")


class FredholmViolation(BusinessRuleError):
    """Raised when a Poisson right-hand side is not centered under the invariant measure"""

    def __init__(self, message: str, component: int = None, value: float = None):
        self.component = component
        self.value = value
        super().__init__(message, "FREDHOLM_VIOLATION")


class CenteringViolation(BusinessRuleError):
    """Raised when the homogenization drift b is not centered"""

    def __init__(self, message: str, component: int = None, value: float = None):
        self.component = component
        self.value = value
        super().__init__(message, "CENTERING_VIOLATION")


class SingularSystem(NumericalError):
    """Raised when a linear system cannot be solved to finite values"""

    def __init__(self, message: str, system: str = None):
        self.system = system
        super().__init__(message, "SINGULAR_SYSTEM")


class MissingCellSolution(ValidationError):
    """Raised when a Regime 1 quantity is requested without the cell solution chi"""

    def __init__(self, message: str = "Regime 1 requires the cell solution chi"):
        super().__init__(message, "MISSING_CELL_SOLUTION")


class MissingCorrector(ValidationError):
    """Raised when theta is evaluated without the correctors it needs"""

    def __init__(self, message: str, corrector: str = None):
        self.corrector = corrector
        super().__init__(message, "MISSING_CORRECTOR")


class UncertifiedCorrector(BusinessRuleError):
    """Raised when a corrector failed its residual or centering certificate"""

    def __init__(self, message: str, residual: float = None, centering: float = None):
        self.residual = residual
        self.centering = centering
        super().__init__(message, "UNCERTIFIED_CORRECTOR")


class SingularQ(NumericalError):
    """Raised when the diffusion matrix q(x) is not positive definite"""

    def __init__(self, message: str, min_eigenvalue: float = None):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(message, "SINGULAR_Q")


class BlowUp(NumericalError):
    """Raised when the averaged trajectory leaves the admissible range"""

    def __init__(self, message: str, time: float = None, value: float = None):
        self.time = time
        self.value = value
        super().__init__(message, "BLOW_UP")


class NonLipschitzDrift(NumericalError):
    """Raised when the Jacobian of lambda_bar along the averaged path is non-finite or too large"""

    def __init__(self, message: str, time: float = None, norm: float = None):
        self.time = time
        self.norm = norm
        super().__init__(message, "NON_LIPSCHITZ_DRIFT")
