"""
Averaging: lambda_i, lambda_bar_i, the averaged trajectory X_bar and the
Jacobian of lambda_bar.
"""

import itertools
import logging
from typing import NamedTuple, Optional

import numpy as np

from core.config import NumericsSettings
from core.validation import ValidationLimits
from exceptions.numerics_exceptions import BlowUp, GridTooCoarse, MissingCellSolution, NonLipschitzDrift
from models.corrector import CorrectorSolution
from models.invariant_density import InvariantDensity
from models.paths import AveragedDrift, AveragedPath
from models.slow_fast_model import SlowFastModel
from services.fast_dynamics_service import FastDynamicsService
from services.poisson_service import PoissonService
from utils.cache import BoundedCache

logger = logging.getLogger(__name__)


class LocalAverage(NamedTuple):
    """Gridded lambda at one slow state with the objects it was built from"""
    density: InvariantDensity
    chi: Optional[CorrectorSolution]
    lambda_values: np.ndarray
    lambda_bar: np.ndarray


class AveragingService:
    """
    Builds averaged drifts. Densities are cached per model fingerprint and
    slow state (a single entry when the fast dynamics do not depend on x)
    in a bounded least-recently-used map. With a positive density_lattice,
    lambda_bar of x-dependent models is interpolated linearly between
    lattice corners so only corner densities are ever solved.
    """

    def __init__(self, settings: NumericsSettings, fast_dynamics_service: FastDynamicsService,
                 poisson_service: PoissonService, poisson_method: Optional[str] = None):
        self._settings = settings
        self._fast_dynamics = fast_dynamics_service
        self._poisson = poisson_service
        self._poisson_method = poisson_method
        self._densities: BoundedCache[InvariantDensity] = BoundedCache(settings.density_cache_size)

    # -- densities ---------------------------------------------------------------

    def density_at(self, model: SlowFastModel, x) -> InvariantDensity:
        x = np.asarray(x, dtype=float).reshape(-1)
        state = tuple(float(v) for v in x) if model.fast_depends_on_x else None
        return self._densities.get_or_create(
            (model.fingerprint, state), lambda: self._fast_dynamics.invariant_density(model, x)
        )

    def clear_cache(self):
        self._densities.clear()

    # -- lambda ----------------------------------------------------------------------

    def lambda_pointwise(self, model: SlowFastModel, x, y, chi: Optional[CorrectorSolution] = None) -> np.ndarray:
        """
        Regime 1: lambda = chi_y g + c; Regime 2: lambda = gamma b + c. y holds
        scalar fast states; the result has shape y.shape + (n,).
        """
        x = np.asarray(x, dtype=float).reshape(1, -1)
        points = np.asarray(y, dtype=float)
        y_col = points.reshape(-1, 1)
        n = model.dimensions.n
        c = np.broadcast_to(model.c(x, y_col), (y_col.shape[0], n))
        if model.regime_index == 1:
            if chi is None:
                raise MissingCellSolution()
            slope = chi.derivative_at(y_col[:, 0])
            g = model.g(x, y_col)[:, :1]
            values = slope * g + c
        else:
            b = np.broadcast_to(model.b(x, y_col), (y_col.shape[0], n))
            values = model.gamma * b + c
        return values.reshape(points.shape + (n,))

    def average_against_mu(self, integrand: np.ndarray, density: InvariantDensity) -> np.ndarray:
        """Componentwise grid quadrature of integrand against the invariant density"""
        return np.asarray(density.integrate(integrand))

    def local_average(self, model: SlowFastModel, x) -> LocalAverage:
        x = np.asarray(x, dtype=float).reshape(-1)
        density = self.density_at(model, x)
        chi = None
        if model.regime_index == 1:
            chi = self._poisson.cell_chi(model, x, density, self._poisson_method)
        values = self.lambda_pointwise(model, x, density.grid.nodes, chi)
        return LocalAverage(density, chi, values, self.average_against_mu(values, density))

    def lambda_bar(self, model: SlowFastModel, x) -> np.ndarray:
        spacing = self._settings.density_lattice
        if not model.fast_depends_on_x or spacing <= 0:
            return self.local_average(model, x).lambda_bar
        return self._lattice_lambda_bar(model, np.asarray(x, dtype=float).reshape(-1), spacing)

    def _lattice_lambda_bar(self, model: SlowFastModel, x: np.ndarray, spacing: float) -> np.ndarray:
        """Multilinear interpolation of lambda_bar between the corners of the lattice cell holding x"""
        scaled = x / spacing
        lower = np.floor(scaled)
        fraction = scaled - lower
        total = np.zeros(model.dimensions.n)
        for corner in itertools.product((0, 1), repeat=x.size):
            offset = np.asarray(corner, dtype=float)
            weight = float(np.prod(np.where(offset > 0, fraction, 1.0 - fraction)))
            if weight == 0.0:
                continue
            total = total + weight * self.local_average(model, (lower + offset) * spacing).lambda_bar
        return total

    # -- averaged drift -----------------------------------------------------------------

    def averaged_drift(self, model: SlowFastModel, analytic: Optional[bool] = None) -> AveragedDrift:
        """
        lambda_bar with its Jacobian. The analytic Jacobian differentiates
        under the integral and needs grad_b, grad_c, grad_g and x-independent fast
        dynamics; otherwise central differences with step 1e-5 (1 + |x|).
        """
        coefficients = model.coefficients
        available = (
            coefficients.grad_b is not None
            and coefficients.grad_c is not None
            and (model.regime_index == 2 or coefficients.grad_g is not None)
            and not model.fast_depends_on_x
        )
        use_analytic = available if analytic is None else (analytic and available)

        def evaluate(x: np.ndarray) -> np.ndarray:
            return self.lambda_bar(model, x)

        if use_analytic:
            def gradient(x: np.ndarray) -> np.ndarray:
                return self._analytic_gradient(model, x)
            method = "analytic"
        else:
            def gradient(x: np.ndarray) -> np.ndarray:
                return self._finite_difference_gradient(evaluate, x)
            method = "quadrature+fd"
        return AveragedDrift(evaluate, gradient, method, model.dimensions.n)

    def grad_lambda_bar(self, drift: AveragedDrift, x) -> np.ndarray:
        """Jacobian [i, j] = d lambda_bar_i / d x_j"""
        return np.atleast_2d(drift.gradient(np.asarray(x, dtype=float).reshape(-1)))

    def _finite_difference_gradient(self, evaluate, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        columns = []
        for j in range(x.size):
            step = self._settings.gradient_step * (1.0 + abs(x[j]))
            shift = np.zeros_like(x)
            shift[j] = step
            columns.append((evaluate(x + shift) - evaluate(x - shift)) / (2.0 * step))
        return np.stack(columns, axis=-1)

    def _analytic_gradient(self, model: SlowFastModel, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        n = model.dimensions.n
        density = self.density_at(model, x)
        x_row, y = model.on_grid(x, density.grid.nodes)
        size = density.grid.size
        grad_c = np.broadcast_to(model.evaluate(model.coefficients.grad_c, x_row, y), (size, n, n))
        grad_b = np.broadcast_to(model.evaluate(model.coefficients.grad_b, x_row, y), (size, n, n))
        if model.regime_index == 2:
            return density.integrate(model.gamma * grad_b + grad_c)

        # d/dx_j chi solves the cell problem with d b / d x_j as right-hand side
        chi = self._poisson.cell_chi(model, x, density, self._poisson_method)
        dchi = self._poisson.solve(model, x, grad_b.reshape(size, n * n), density, self._poisson_method)
        g = model.g(x_row, y)[:, 0]
        grad_g = model.evaluate(model.coefficients.grad_g, x_row, y)
        grad_g = np.broadcast_to(grad_g, (size, model.dimensions.d, n))[:, 0, :]
        integrand = (
            dchi.dy_values.reshape(size, n, n) * g[:, None, None]
            + chi.dy_values[:, :, None] * grad_g[:, None, :]
            + grad_c
        )
        return density.integrate(integrand)

    # -- averaged trajectory ---------------------------------------------------------------

    def solve_xbar(self, drift: AveragedDrift, x0, nodes: Optional[int] = None) -> AveragedPath:
        """
        Classical RK4 on [0, 1], refined by step halving until the Richardson
        error estimate drops below the configured target.
        """
        nodes = nodes or self._settings.path_nodes
        if nodes < ValidationLimits.MIN_PATH_NODES:
            raise GridTooCoarse(f"The averaged path needs at least {ValidationLimits.MIN_PATH_NODES} nodes", nodes)
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        times = np.linspace(0.0, 1.0, nodes)
        substeps = 1
        coarse = self._rk4(drift, x0, times, substeps)
        fine = self._rk4(drift, x0, times, 2 * substeps)
        error = float(np.max(np.abs(coarse - fine))) / 15.0
        refinements = 0
        while error > self._settings.xbar_error_target and refinements < ValidationLimits.MAX_XBAR_REFINEMENTS:
            substeps *= 2
            coarse = fine
            fine = self._rk4(drift, x0, times, 2 * substeps)
            error = float(np.max(np.abs(coarse - fine))) / 15.0
            refinements += 1
        if error > self._settings.xbar_error_target:
            logger.warning(f"Averaged path error estimate {error:.3e} above target after {refinements} refinements")
        self._check_lipschitz(drift, times, fine)
        slopes = np.stack([drift(value) for value in fine])
        return AveragedPath(times, fine, slopes, "rk4", error)

    @staticmethod
    def _check_lipschitz(drift: AveragedDrift, times: np.ndarray, values: np.ndarray):
        """grad lambda_bar must be finite with spectral norm at most MAX_DRIFT_JACOBIAN at the sampled nodes"""
        bound = ValidationLimits.MAX_DRIFT_JACOBIAN
        samples = np.linspace(0, times.size - 1, ValidationLimits.LIPSCHITZ_SAMPLES).round().astype(int)
        samples = np.unique(samples)
        for index in samples:
            jacobian = np.atleast_2d(np.asarray(drift.gradient(values[index]), dtype=float))
            norm = float(np.linalg.norm(jacobian, ord=2)) if np.all(np.isfinite(jacobian)) else float("inf")
            if norm > bound:
                t = float(times[index])
                raise NonLipschitzDrift(
                    f"Jacobian of the averaged drift has norm {norm:.3e} > {bound:.0e} at t = {t:.6g}", t, norm
                )

    @staticmethod
    def _rk4(drift: AveragedDrift, x0: np.ndarray, times: np.ndarray, substeps: int) -> np.ndarray:
        values = np.empty((times.size, x0.size))
        values[0] = x0
        state = x0.copy()
        dt = (times[1] - times[0]) / substeps
        bound = ValidationLimits.BLOW_UP_BOUND
        t = 0.0
        for index in range(1, times.size):
            for _ in range(substeps):
                k1 = drift(state)
                k2 = drift(state + 0.5 * dt * k1)
                k3 = drift(state + 0.5 * dt * k2)
                k4 = drift(state + dt * k3)
                state = state + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
                t += dt
                size = float(np.max(np.abs(state)))
                if not np.isfinite(size) or size > bound:
                    raise BlowUp(f"Averaged trajectory left |x| <= {bound:.0e} at t = {t:.6g}", t, size)
            values[index] = state
        return values
