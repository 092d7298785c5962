"""
Cell problem and fluctuation corrector in the fast variable.
"""

import logging
from typing import Dict, Optional

import numpy as np

from core.config import NumericsSettings
from exceptions.model_exceptions import InvalidModelDefinition, UnsupportedDimension
from exceptions.numerics_exceptions import CenteringViolation, SingularSystem
from models.corrector import CorrectorSolution
from models.invariant_density import InvariantDensity
from models.slow_fast_model import SlowFastModel
from services.fast_dynamics_service import FastDynamicsService
from services.interfaces.poisson_solver import PoissonSolverInterface
from services.poisson_solvers import FiniteDifferencePoissonSolver, QuadraturePoissonSolver

logger = logging.getLogger(__name__)


class PoissonService:
    """
    Dispatches Poisson solves to the quadrature or finite-difference solver.
    With method=None the quadrature route is used for reversible fast
    dynamics and the finite-difference route otherwise.
    """

    def __init__(self, settings: NumericsSettings, fast_dynamics_service: FastDynamicsService,
                 solvers: Optional[Dict[str, PoissonSolverInterface]] = None):
        self._settings = settings
        self._fast_dynamics = fast_dynamics_service
        self._solvers = solvers or {
            "quadrature": QuadraturePoissonSolver(settings, fast_dynamics_service),
            "fd": FiniteDifferencePoissonSolver(settings, fast_dynamics_service),
        }

    def solver(self, method: str) -> PoissonSolverInterface:
        try:
            return self._solvers[method]
        except KeyError:
            raise InvalidModelDefinition(f"Unknown Poisson solver {method!r}", "solver")

    def solve_poisson_quadrature_1d(self, model: SlowFastModel, x, rhs: np.ndarray,
                                    density: InvariantDensity) -> CorrectorSolution:
        self._require_one_dimensional(model)
        return self.solver("quadrature").solve(model, x, rhs, density)

    def solve_poisson_fd_1d(self, model: SlowFastModel, x, rhs: np.ndarray,
                            density: InvariantDensity) -> CorrectorSolution:
        self._require_one_dimensional(model)
        return self.solver("fd").solve(model, x, rhs, density)

    def solve(self, model: SlowFastModel, x, rhs: np.ndarray, density: InvariantDensity,
              method: Optional[str] = None) -> CorrectorSolution:
        self._require_one_dimensional(model)
        if method is None:
            method = "quadrature" if abs(density.flux) <= 1e-10 else "fd"
        try:
            return self.solver(method).solve(model, x, rhs, density)
        except SingularSystem as exc:
            if method != "quadrature" or exc.system != "quadrature":
                raise
            logger.warning(f"Quadrature Poisson route unavailable ({exc.message}); falling back to fd")
            return self.solver("fd").solve(model, x, rhs, density)

    def cell_chi(self, model: SlowFastModel, x, density: InvariantDensity,
                 method: Optional[str] = None) -> CorrectorSolution:
        """n columns of L chi = -b, int chi dmu = 0 (Regime 1 only)"""
        if model.regime_index != 1:
            raise InvalidModelDefinition("The cell problem is only posed in Regime 1", "regime")
        self._require_one_dimensional(model)
        x = np.asarray(x, dtype=float)
        x_row, y = model.on_grid(x, density.grid.nodes)
        drift = np.broadcast_to(model.b(x_row, y), (density.grid.size, model.dimensions.n))
        means = np.atleast_1d(density.integrate(drift))
        for component, value in enumerate(means):
            if abs(value) >= self._settings.fredholm_tolerance:
                raise CenteringViolation(
                    f"b_{component + 1} is not centered at x = {x.tolist()}: int b dmu = {value:.3e}",
                    component + 1, float(value),
                )
        return self.solve(model, x, drift, density, method)

    def corrector_phi(self, model: SlowFastModel, x, density: InvariantDensity,
                      lambda_centered: np.ndarray, method: Optional[str] = None) -> CorrectorSolution:
        """n columns of L Phi = -(lambda - lambda_bar), int Phi dmu = 0"""
        self._require_one_dimensional(model)
        lambda_centered = np.asarray(lambda_centered, dtype=float)
        return self.solve(model, np.asarray(x, dtype=float), lambda_centered, density, method)

    @staticmethod
    def _require_one_dimensional(model: SlowFastModel):
        if model.dimensions.d != 1:
            raise UnsupportedDimension("Poisson solves need a one-dimensional fast variable", model.dimensions.d)
