from abc import ABC, abstractmethod

import numpy as np

from models.corrector import CorrectorSolution
from models.invariant_density import InvariantDensity
from models.slow_fast_model import SlowFastModel


class PoissonSolverInterface(ABC):
    """
    Abstract interface for one-dimensional Poisson solvers L u = -F with the
    centering constraint int u dmu = 0.
    """

    method: str = ""

    @abstractmethod
    def solve(self, model: SlowFastModel, x: np.ndarray, rhs: np.ndarray,
              density: InvariantDensity) -> CorrectorSolution:
        """Solve column-wise for a right-hand side of shape (N, k)"""
        ...
