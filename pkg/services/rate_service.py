"""
Moderate-deviation rate: alpha fields, q(x), kappa(x, eta), local rate,
discrete action functional and its linear-quadratic minimization, theta
drifts and the explicit optimal controls.
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from core.config import NumericsSettings
from exceptions.model_exceptions import UnsupportedDimension
from exceptions.numerics_exceptions import MissingCorrector, SingularSystem, UncertifiedCorrector
from exceptions.simulation_exceptions import MinimizationFailed
from models.corrector import CorrectorSolution
from models.invariant_density import InvariantDensity
from models.paths import AveragedDrift, AveragedPath, DeviationPath
from models.rate import (
    KappaMap,
    LocalIngredients,
    LocalRateQuery,
    OptimalControls,
    QMatrix,
    RateAlongPath,
    RateIngredients,
)
from models.slow_fast_model import SlowFastModel
from schemas.run_config import EventSpec
from services.averaging_service import AveragingService
from services.condition_service import ConditionService
from services.poisson_service import PoissonService

logger = logging.getLogger(__name__)

Rates = Union[RateIngredients, RateAlongPath]


class RateService:
    """Builds rate ingredients per slow state and evaluates actions along X_bar"""

    def __init__(self, settings: NumericsSettings, poisson_service: PoissonService,
                 averaging_service: AveragingService, condition_service: ConditionService,
                 poisson_method: Optional[str] = None, allow_uncertified: bool = False):
        self._settings = settings
        self._poisson = poisson_service
        self._averaging = averaging_service
        self._conditions = condition_service
        self._poisson_method = poisson_method
        self._allow_uncertified = allow_uncertified

    # -- constants -------------------------------------------------------------

    def limit_constant(self, model: SlowFastModel) -> float:
        """j1 in Regime 1, j2 in Regime 2"""
        regime = self._conditions.resolve_regime(model.regime)
        return float(regime.j1 if regime.regime == 1 else regime.j2)

    # -- pointwise ingredients ---------------------------------------------------

    def build_alphas(self, model: SlowFastModel, x, corrector: CorrectorSolution,
                     density: InvariantDensity) -> Tuple[np.ndarray, np.ndarray]:
        """
        alpha1 = sigma + u_y tau1, alpha2 = u_y tau2 on the density grid, where u
        is chi in Regime 1 and Phi in Regime 2. Shapes (N, n, m).
        """
        self._require_certified(corrector, "alpha")
        x_row, y = model.on_grid(np.asarray(x, dtype=float), density.grid.nodes)
        size, n, m = density.grid.size, model.dimensions.n, model.dimensions.m
        sigma = np.broadcast_to(model.sigma(x_row, y), (size, n, m))
        tau1 = np.broadcast_to(model.tau1(x_row, y), (size, 1, m))
        tau2 = np.broadcast_to(model.tau2(x_row, y), (size, 1, m))
        slope = corrector.dy_values[:, :, None]
        return sigma + slope * tau1, slope * tau2

    def build_q(self, alpha1: np.ndarray, alpha2: np.ndarray, density: InvariantDensity) -> QMatrix:
        outer = np.einsum("kim,kjm->kij", alpha1, alpha1) + np.einsum("kim,kjm->kij", alpha2, alpha2)
        return QMatrix(density.integrate(outer), floor=self._settings.min_q_eigenvalue)

    def build_kappa(self, model: SlowFastModel, x, phi: CorrectorSolution, density: InvariantDensity,
                    grad_lambda_bar: np.ndarray) -> KappaMap:
        """
        Regime 1: d = j1 int Phi_y g dmu; Regime 2: d = j2 int [b - Phi_y g / gamma] dmu.
        A is the Jacobian of lambda_bar as given.
        """
        self._require_certified(phi, "kappa")
        A = np.atleast_2d(np.asarray(grad_lambda_bar, dtype=float))
        n = model.dimensions.n
        j = self.limit_constant(model)
        if j == 0.0:
            return KappaMap(A, np.zeros(n))
        x_row, y = model.on_grid(np.asarray(x, dtype=float), density.grid.nodes)
        g = model.g(x_row, y)[:, :1]
        if model.regime_index == 1:
            integrand = phi.dy_values * g
        else:
            b = np.broadcast_to(model.b(x_row, y), (density.grid.size, n))
            integrand = b - phi.dy_values * g / model.gamma
        return KappaMap(A, j * np.atleast_1d(density.integrate(integrand)))

    def local_ingredients(self, model: SlowFastModel, x, drift: Optional[AveragedDrift] = None) -> LocalIngredients:
        if model.dimensions.d != 1:
            raise UnsupportedDimension("Rate ingredients need a one-dimensional fast variable", model.dimensions.d)
        x = np.asarray(x, dtype=float).reshape(-1)
        drift = drift or self._averaging.averaged_drift(model)
        local = self._averaging.local_average(model, x)
        centered = local.lambda_values - local.lambda_bar[None, :]
        phi = self._poisson.corrector_phi(model, x, local.density, centered, self._poisson_method)
        corrector = local.chi if model.regime_index == 1 else phi
        alpha1, alpha2 = self.build_alphas(model, x, corrector, local.density)
        q = self.build_q(alpha1, alpha2, local.density)
        kappa = self.build_kappa(model, x, phi, local.density, self._averaging.grad_lambda_bar(drift, x))
        return LocalIngredients(x, local.density, local.lambda_bar, kappa, q, alpha1, alpha2, phi, local.chi)

    def build_ingredients(self, model: SlowFastModel, drift: Optional[AveragedDrift] = None) -> RateIngredients:
        """Lazy, cached x -> LocalIngredients for one model"""
        drift = drift or self._averaging.averaged_drift(model)
        return RateIngredients(lambda x: self.local_ingredients(model, x, drift), model.dimensions.n)

    def local_rate(self, ingredients: RateIngredients, query: LocalRateQuery) -> float:
        """1/2 (beta - kappa(x, eta))^T q(x)^{-1} (beta - kappa(x, eta))"""
        return max(ingredients.local_rate(query), 0.0)

    # -- paths -----------------------------------------------------------------------

    def action_functional(self, rates: Rates, xbar: AveragedPath, xi: DeviationPath) -> float:
        """Left-endpoint sum with forward-difference velocities"""
        xi.check_grid(xbar)
        along = self._along(rates, xbar)
        velocity = xi.velocities()
        eta = xi.values[:-1]
        residual = velocity - np.einsum("kij,kj->ki", along.A[:-1], eta) - along.d[:-1]
        dt = np.diff(xi.times)
        total = 0.0
        for k in range(residual.shape[0]):
            total += 0.5 * dt[k] * float(residual[k] @ np.linalg.solve(along.q[k], residual[k]))
        return max(total, 0.0)

    def zero_cost_path(self, rates: Rates, xbar: AveragedPath, integrator: str = "euler") -> DeviationPath:
        """
        xi' = A(X_bar) xi + d(X_bar), xi_0 = 0. The explicit recursion zeroes
        every term of the discrete action; rk4 interpolates A and d linearly.
        """
        along = self._along(rates, xbar)
        times = xbar.times
        values = np.zeros((times.size, along.dimension))
        for k in range(times.size - 1):
            dt = times[k + 1] - times[k]
            state = values[k]
            if integrator == "euler":
                values[k + 1] = state + dt * (along.A[k] @ state + along.d[k])
                continue
            A_mid = 0.5 * (along.A[k] + along.A[k + 1])
            d_mid = 0.5 * (along.d[k] + along.d[k + 1])
            k1 = along.A[k] @ state + along.d[k]
            k2 = A_mid @ (state + 0.5 * dt * k1) + d_mid
            k3 = A_mid @ (state + 0.5 * dt * k2) + d_mid
            k4 = along.A[k + 1] @ (state + dt * k3) + along.d[k + 1]
            values[k + 1] = state + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        return DeviationPath(times, values)

    def minimize_action_endpoint(self, rates: Rates, xbar: AveragedPath, target) -> Tuple[DeviationPath, float]:
        """
        Minimizes the discrete action over xi_0 = 0, xi_N = target by solving
        the block-tridiagonal Euler-Lagrange system once.
        """
        along = self._along(rates, xbar)
        n = along.dimension
        target = np.asarray(target, dtype=float).reshape(n)
        if not np.all(np.isfinite(target)):
            raise MinimizationFailed("Endpoint target must be finite", target.tolist())
        times = xbar.times
        steps = times.size - 1
        dt = np.diff(times)
        identity = np.eye(n)
        M = identity[None, :, :] + dt[:, None, None] * along.A[:-1]
        W = np.stack([np.linalg.inv(along.q[k]) / dt[k] for k in range(steps)])
        forcing = dt[:, None] * along.d[:-1]
        unknowns = steps - 1
        if unknowns == 0:
            path = np.vstack([np.zeros(n), target])
            xi = DeviationPath(times, path)
            return xi, self.action_functional(along, xbar, xi)

        rows = [[None] * unknowns for _ in range(unknowns)]
        rhs = np.zeros((unknowns, n))
        for j in range(1, steps):
            row = j - 1
            rows[row][row] = W[j - 1] + M[j].T @ W[j] @ M[j]
            if row > 0:
                rows[row][row - 1] = -W[j - 1] @ M[j - 1]
                rows[row - 1][row] = (-W[j - 1] @ M[j - 1]).T
            rhs[row] = W[j - 1] @ forcing[j - 1] - M[j].T @ W[j] @ forcing[j]
        rhs[-1] += M[steps - 1].T @ W[steps - 1] @ target
        blocks = [[sparse.csr_matrix(block) if block is not None else None for block in row] for row in rows]
        system = sparse.bmat(blocks, format="csc")
        solution = np.asarray(spsolve(system, rhs.reshape(-1)), dtype=float)
        if not np.all(np.isfinite(solution)):
            raise SingularSystem("Euler-Lagrange system for the endpoint problem is singular", "euler_lagrange")
        path = np.vstack([np.zeros(n), solution.reshape(unknowns, n), target])
        xi = DeviationPath(times, path)
        return xi, self.action_functional(along, xbar, xi)

    # -- linear-quadratic structure -------------------------------------------------------

    def gramian(self, rates: Rates, xbar: AveragedPath) -> np.ndarray:
        """G_{k+1} = (I + dt A_k) G_k (I + dt A_k)^T + dt q_k, G_0 = 0; returns G_N"""
        return self.lyapunov_variance(rates, xbar)[-1]

    def lyapunov_variance(self, rates: Rates, xbar: AveragedPath) -> np.ndarray:
        """
        Covariance of the linear limit with h = 1 at every node, shape
        (N + 1, n, n); discrete recursion of V' = A V + V A^T + q, V_0 = 0.
        """
        along = self._along(rates, xbar)
        n = along.dimension
        times = xbar.times
        variance = np.zeros((times.size, n, n))
        for k in range(times.size - 1):
            dt = times[k + 1] - times[k]
            M = np.eye(n) + dt * along.A[k]
            step = M @ variance[k] @ M.T + dt * along.q[k]
            variance[k + 1] = 0.5 * (step + step.T)
        return variance

    def dominant_endpoint(self, rates: Rates, xbar: AveragedPath, event: EventSpec) -> Tuple[np.ndarray, float]:
        """
        Cheapest endpoint of the event half-space under the discrete action:
        e0 + G l (a - l.e0) / (l^T G l) with cost 1/2 (a - l.e0)_+^2 / (l^T G l),
        or the zero-cost endpoint e0 when it already lies in the event.
        """
        along = self._along(rates, xbar)
        e0 = self.zero_cost_path(along, xbar).values[-1]
        functional = event.sign * np.asarray(event.functional, dtype=float)
        threshold = event.sign * event.threshold
        if threshold == -math.inf:
            return e0, 0.0
        if threshold == math.inf:
            raise MinimizationFailed("The event is empty: threshold is infinite", event.text())
        shortfall = threshold - float(functional @ e0)
        if shortfall <= 0.0:
            return e0, 0.0
        G = self.gramian(along, xbar)
        spread = float(functional @ G @ functional)
        if not spread > 0.0:
            raise MinimizationFailed("Controllability Gramian is degenerate along the event direction",
                                     event.text())
        endpoint = e0 + G @ functional * shortfall / spread
        return endpoint, 0.5 * shortfall ** 2 / spread

    # -- theta and controls -------------------------------------------------------------------

    def theta_drift(self, model: SlowFastModel, local: LocalIngredients, eta, y, z1, z2) -> np.ndarray:
        """
        Regime 1: chi_y (tau1 z1 + tau2 z2) + j1 Phi_y g + A eta + sigma z1.
        Regime 2: j2 b + Phi_y (tau1 z1 + tau2 z2) + A eta + sigma z1 + j2 Phi_y f
        + (j2 / 2) (tau1 tau1^T + tau2 tau2^T) : Phi_yy.
        y holds scalar fast states; the result has shape y.shape + (n,).
        """
        points = np.asarray(y, dtype=float)
        flat = points.reshape(-1)
        x_row = local.x.reshape(1, -1)
        y_col = flat.reshape(-1, 1)
        count, n, m = flat.size, model.dimensions.n, model.dimensions.m
        z1 = np.asarray(z1, dtype=float).reshape(m)
        z2 = np.asarray(z2, dtype=float).reshape(m)
        j = self.limit_constant(model)
        phi = local.phi
        if phi is None:
            raise MissingCorrector("theta needs the fluctuation corrector Phi", "phi")
        sigma = np.broadcast_to(model.sigma(x_row, y_col), (count, n, m))
        tau1 = np.broadcast_to(model.tau1(x_row, y_col), (count, 1, m))
        tau2 = np.broadcast_to(model.tau2(x_row, y_col), (count, 1, m))
        noise = tau1[:, 0, :] @ z1 + tau2[:, 0, :] @ z2
        phi_y = phi.derivative_at(flat)
        values = local.kappa.A @ np.asarray(eta, dtype=float).reshape(n) + sigma @ z1
        if model.regime_index == 1:
            if local.chi is None:
                raise MissingCorrector("Regime 1 theta needs the cell solution chi", "chi")
            values = values + local.chi.derivative_at(flat) * noise[:, None]
            if j != 0.0:
                values = values + j * phi_y * model.g(x_row, y_col)[:, :1]
        else:
            if phi.d2y_values is None:
                raise MissingCorrector("Regime 2 theta needs the second derivative of Phi", "phi_yy")
            values = values + phi_y * noise[:, None]
            if j != 0.0:
                b = np.broadcast_to(model.b(x_row, y_col), (count, n))
                f = model.f(x_row, y_col)[:, :1]
                covariance = model.fast_noise_covariance(x_row, y_col)[:, 0, :1]
                values = values + j * (b + phi_y * f + 0.5 * covariance * phi.second_derivative_at(flat))
        return values.reshape(points.shape + (n,))

    def theta_average(self, model: SlowFastModel, local: LocalIngredients, eta, z1, z2) -> np.ndarray:
        """int theta(x, eta, y, z1, z2) mu_x(dy)"""
        nodes = local.density.grid.nodes
        return np.atleast_1d(local.density.integrate(self.theta_drift(model, local, eta, nodes, z1, z2)))

    def optimal_controls(self, local: LocalIngredients, eta, beta) -> OptimalControls:
        """
        v1(y) = alpha1^T q^{-1} (beta - kappa), v2(y) = alpha2^T q^{-1} (beta - kappa),
        with the attained cost and its closed form.
        """
        residual = np.asarray(beta, dtype=float) - local.kappa(eta)
        weights = local.q.solve(residual)
        v1 = np.einsum("kim,i->km", local.alpha1, weights)
        v2 = np.einsum("kim,i->km", local.alpha2, weights)
        cost = float(local.density.integrate(np.sum(v1 ** 2, axis=1) + np.sum(v2 ** 2, axis=1)))
        return OptimalControls(v1, v2, cost, float(residual @ weights))

    # -- helpers ------------------------------------------------------------------------------

    def _along(self, rates: Rates, xbar: AveragedPath) -> RateAlongPath:
        if isinstance(rates, RateAlongPath):
            rates.check_grid(xbar.times)
            return rates
        return rates.along(xbar)

    def _require_certified(self, corrector: CorrectorSolution, purpose: str):
        if corrector.certified:
            return
        message = (
            f"Corrector used for {purpose} is not certified "
            f"(residual {corrector.residual_sup:.3e}, centering {corrector.centering_defect:.3e})"
        )
        if self._allow_uncertified:
            logger.warning(message)
            return
        raise UncertifiedCorrector(message, corrector.residual_sup, corrector.centering_defect)


def event_indicator(event: EventSpec, eta: np.ndarray) -> np.ndarray:
    """1 where the endpoint deviation lies in the event half-space"""
    projection = np.asarray(eta, dtype=float) @ np.asarray(event.functional, dtype=float)
    if event.direction == ">=":
        return (projection >= event.threshold).astype(float)
    return (projection <= event.threshold).astype(float)

