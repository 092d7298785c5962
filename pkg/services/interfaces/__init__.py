# Service interfaces package
from .poisson_solver import PoissonSolverInterface

__all__ = ["PoissonSolverInterface"]
