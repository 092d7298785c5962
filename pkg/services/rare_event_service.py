"""
Moderate-deviation probabilities of endpoint events: plain Monte Carlo,
importance sampling with the explicit optimal feedback control, and the
log-asymptotic approximation exp(-h^2 S*).
"""

import logging
import math
from typing import Callable, List, Optional

import numpy as np
from scipy import stats

from core.validation import ValidationLimits
from models.paths import AveragedPath, DeviationPath, PathBatch
from models.rate import LocalIngredients, RateIngredients
from models.slow_fast_model import SlowFastModel
from schemas.results import EstimatorResult
from schemas.run_config import EventSpec, SimConfig
from services.rate_service import RateService, event_indicator
from services.simulation_service import ControlFunction, SimulationService
from utils.quadrature import compensated_mean

logger = logging.getLogger(__name__)


class RareEventService:
    """Estimates P(l . eta_1 >= a) (or <= a) for the deviation process"""

    def __init__(self, simulation_service: SimulationService, rate_service: RateService):
        self._simulation = simulation_service
        self._rates = rate_service

    # -- plain Monte Carlo --------------------------------------------------------

    def estimate_plain(self, model: SlowFastModel, sim: SimConfig, event: EventSpec,
                       xbar: Optional[AveragedPath] = None) -> EstimatorResult:
        """Indicator mean with binomial standard error and a Clopper-Pearson interval"""
        batch = self._simulation.simulate_uncontrolled(model, sim, xbar)
        hits = event_indicator(event, batch.final_eta)
        count = hits.size
        successes = int(round(float(np.sum(hits))))
        estimate = successes / count
        std_error = math.sqrt(estimate * (1.0 - estimate) / count)
        if successes == 0:
            logger.warning(f"No path of {count} hit the event {event.text()}; reporting a one-sided interval")
            low, high = 0.0, min(1.0, ValidationLimits.ZERO_HIT_UPPER / count)
        else:
            interval = stats.binomtest(successes, count).proportion_ci(
                confidence_level=ValidationLimits.CONFIDENCE_LEVEL, method="exact"
            )
            low, high = float(interval.low), float(interval.high)
        return EstimatorResult(
            method="plain",
            estimate=estimate,
            std_error=std_error,
            ci_low=low,
            ci_high=high,
            sample_count=count,
            second_moment=estimate,
            relative_error=std_error / estimate if estimate > 0 else math.inf,
            epsilon=batch.epsilon,
            h=batch.h,
            zero_hits=successes == 0,
            log_asymptote=-math.log(estimate) / batch.h ** 2 if estimate > 0 else None,
        )

    # -- importance sampling ------------------------------------------------------------

    def estimate_is(self, model: SlowFastModel, sim: SimConfig, event: EventSpec,
                    ingredients: RateIngredients, xbar: Optional[AveragedPath] = None,
                    on_batch: Optional[Callable[[PathBatch], None]] = None) -> EstimatorResult:
        """
        Tilts towards the cheapest endpoint of the event: psi minimizes the
        discrete action with that endpoint, and the feedback control
        u(t, eta, y) = (alpha1, alpha2)^T q^{-1} (psi' - kappa(X_bar_t, eta))
        is applied. The weighted indicator is unbiased for the nominal probability.
        on_batch receives the controlled batch, e.g. to export per-path weights.
        """
        xbar = xbar or self._simulation.averaged_path(model)
        endpoint, s_star = self._rates.dominant_endpoint(ingredients, xbar, event)
        psi, _ = self._rates.minimize_action_endpoint(ingredients, xbar, endpoint)
        control = self.feedback_control(ingredients, xbar, psi)
        batch = self._simulation.simulate_controlled(model, sim, control, xbar)
        if on_batch is not None:
            on_batch(batch)

        hits = event_indicator(event, batch.final_eta)
        weights = batch.weights
        weighted = hits * weights
        count = weighted.size
        raw = compensated_mean(weighted)
        second = compensated_mean(weighted ** 2)
        std_error = float(np.std(weighted, ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        quantile = float(stats.norm.ppf(0.5 + 0.5 * ValidationLimits.CONFIDENCE_LEVEL))
        estimate = min(max(raw, 0.0), 1.0)
        if raw > 1.0:
            logger.warning(f"Importance-sampling estimate {raw:.4f} exceeds 1; clipped")
        low = max(0.0, estimate - quantile * std_error)
        high = min(1.0, estimate + quantile * std_error)
        weight_mean = compensated_mean(weights)
        weight_error = float(np.std(weights, ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        h = batch.h
        return EstimatorResult(
            method="is",
            estimate=estimate,
            std_error=std_error,
            ci_low=low,
            ci_high=high,
            sample_count=count,
            second_moment=max(second, estimate ** 2),
            relative_error=std_error / estimate if estimate > 0 else math.inf,
            epsilon=batch.epsilon,
            h=h,
            zero_hits=not np.any(hits),
            s_star=s_star,
            mdp_approx=math.exp(-h * h * s_star),
            log_asymptote=-math.log(estimate) / h ** 2 if estimate > 0 else None,
            weight_mean=weight_mean,
            weight_std_error=weight_error,
        )

    def feedback_control(self, ingredients: RateIngredients, xbar: AveragedPath,
                         psi: DeviationPath) -> ControlFunction:
        """
        Piecewise-constant in time on the path grid: the alpha fields, q and
        kappa of the node to the left of t, and psi' on that interval.
        """
        nodes: List[LocalIngredients] = ingredients.nodes(xbar)
        velocities = psi.velocities()
        times = xbar.times
        last = velocities.shape[0] - 1

        def control(t: float, x: np.ndarray, y: np.ndarray, eta: np.ndarray) -> np.ndarray:
            index = min(int(np.searchsorted(times, t, side="right")) - 1, last)
            local = nodes[max(index, 0)]
            grid = local.density.grid
            points = y[:, 0]
            alpha1 = grid.interpolate(local.alpha1, points)
            alpha2 = grid.interpolate(local.alpha2, points)
            residual = velocities[index][None, :] - local.kappa(eta)
            weights = local.q.solve(residual.T).T
            u1 = np.einsum("pim,pi->pm", alpha1, weights)
            u2 = np.einsum("pim,pi->pm", alpha2, weights)
            return np.concatenate([u1, u2], axis=1)

        return control

    # -- asymptotics -----------------------------------------------------------------------

    def mdp_asymptote(self, ingredients: RateIngredients, xbar: AveragedPath, event: EventSpec, h: float) -> float:
        """exp(-h^2 S*): log-asymptotic only, the prefactor is unknown"""
        _, s_star = self._rates.dominant_endpoint(ingredients, xbar, event)
        return math.exp(-h * h * s_star)
