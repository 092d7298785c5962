"""
Euler-Maruyama simulation of the slow-fast system, with and without
controls, plus the simulation-side cross-checks of the limit theory.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from core.config import SimulationSettings
from core.validation import ValidationLimits
from exceptions.model_exceptions import MissingScalingFamily
from exceptions.simulation_exceptions import NumericalBlowUp, WeightOverflow
from models.paths import AveragedPath, PathBatch
from models.rate import RateIngredients
from models.slow_fast_model import SlowFastModel
from schemas.results import LimitCheckReport, MomentDiagnostic
from schemas.run_config import SimConfig
from services.averaging_service import AveragingService
from services.rate_service import RateService
from utils.cache import BoundedCache
from utils.quadrature import compensated_mean
from utils.random_streams import block_generators, draw_normals

logger = logging.getLogger(__name__)

# (t, x, y, eta) for a block of paths -> controls of shape (paths, 2m)
ControlFunction = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class StepPlan:
    """Scales and time stepping derived from a SimConfig"""
    epsilon: float
    delta: float
    h: float
    steps: int
    dt: float
    records: tuple


def constant_control(value: Sequence[float]) -> ControlFunction:
    """Control that ignores the state"""
    value = np.asarray(value, dtype=float).reshape(-1)

    def control(t: float, x: np.ndarray, y: np.ndarray, eta: np.ndarray) -> np.ndarray:
        return np.broadcast_to(value, (x.shape[0], value.size))

    return control


class SimulationService:
    """
    Paths are simulated in fixed-size blocks; each path draws its noise from
    its own counter-based stream, so results do not depend on the number of
    worker threads.
    """

    def __init__(self, settings: SimulationSettings, averaging_service: AveragingService,
                 rate_service: RateService):
        self._settings = settings
        self._averaging = averaging_service
        self._rates = rate_service
        self._paths: BoundedCache[AveragedPath] = BoundedCache(settings.path_cache_size)

    # -- set-up ----------------------------------------------------------------------

    def averaged_path(self, model: SlowFastModel, nodes: Optional[int] = None) -> AveragedPath:
        key = (model.fingerprint, tuple(model.x0.tolist()), nodes)
        return self._paths.get_or_create(
            key, lambda: self._averaging.solve_xbar(self._averaging.averaged_drift(model), model.x0, nodes)
        )

    def plan(self, model: SlowFastModel, sim: SimConfig, need_h: bool = False) -> StepPlan:
        epsilon = sim.epsilon
        family = model.regime.scaling_family
        if family is not None:
            delta = family.delta(epsilon)
        elif model.regime_index == 2:
            delta = epsilon / model.gamma
        else:
            raise MissingScalingFamily("Simulation in Regime 1 needs delta(eps) from a scaling family", "delta")
        if sim.h is not None:
            h = sim.h
        elif family is not None:
            h = family.h(epsilon)
        elif need_h:
            raise MissingScalingFamily("Controlled simulation needs h(eps) from a scaling family or --h", "h")
        else:
            h = 1.0
        fast_time = delta * delta / epsilon
        dt = min(fast_time / sim.substeps, sim.dt_cap)
        steps = int(math.ceil(1.0 / dt - 1e-9))
        dt = 1.0 / steps
        if sim.record_stride > 0:
            records = list(range(0, steps + 1, sim.record_stride))
            if records[-1] != steps:
                records.append(steps)
        else:
            records = [0, steps]
        self._stiffness_advisory(model, epsilon, delta, dt)
        return StepPlan(epsilon, delta, h, steps, dt, tuple(records))

    def _stiffness_advisory(self, model: SlowFastModel, epsilon: float, delta: float, dt: float):
        x = model.x0.reshape(1, -1)
        step = 1e-4 * (1.0 + float(np.max(np.abs(model.y0))))
        up = model.y0 + step
        down = model.y0 - step
        slope = (model.f(x, up.reshape(1, -1)) - model.f(x, down.reshape(1, -1))) / (2.0 * step)
        stiffness = float(np.max(np.abs(slope))) * epsilon / (delta * delta)
        if dt * stiffness >= self._settings.stiffness_advisory:
            logger.warning(f"dt * fast stiffness = {dt * stiffness:.3f}; consider more substeps")

    # -- simulation ----------------------------------------------------------------------

    def simulate_uncontrolled(self, model: SlowFastModel, sim: SimConfig,
                              xbar: Optional[AveragedPath] = None) -> PathBatch:
        return self._simulate(model, sim, None, xbar)

    def simulate_controlled(self, model: SlowFastModel, sim: SimConfig, control: ControlFunction,
                            xbar: Optional[AveragedPath] = None) -> PathBatch:
        """
        Adds sqrt(eps) h sigma u1 to the slow drift and (sqrt(eps) h / delta)
        (tau1 u1 + tau2 u2) to the fast drift, and accumulates the log-weight
        -h sum u . dW - (h^2 / 2) sum |u|^2 dt that undoes the change of measure.
        """
        return self._simulate(model, sim, control, xbar)

    def _simulate(self, model: SlowFastModel, sim: SimConfig, control: Optional[ControlFunction],
                  xbar: Optional[AveragedPath]) -> PathBatch:
        plan = self.plan(model, sim, need_h=control is not None)
        xbar = xbar or self.averaged_path(model)
        step_times = np.arange(plan.steps + 1) * plan.dt
        centers = xbar(step_times)
        starts = list(range(0, sim.path_count, sim.block_size))
        logger.info(
            f"Simulating {sim.path_count} paths of {model.name} at eps={plan.epsilon!r}: "
            f"{plan.steps} steps, {len(starts)} blocks, {sim.workers} workers"
        )

        def run(first: int):
            count = min(sim.block_size, sim.path_count - first)
            return self._simulate_block(model, sim, plan, control, centers, first, count)

        if sim.workers > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=sim.workers) as pool:
                blocks = list(pool.map(run, starts))
        else:
            blocks = [run(first) for first in starts]

        def stack(index: int):
            return np.concatenate([block[index] for block in blocks], axis=0)

        y_power = stack(5) if sim.y_power is not None else None
        return PathBatch(
            times=step_times[list(plan.records)],
            x=stack(0), y=stack(1), eta=stack(2),
            log_weights=stack(3), control_energy=stack(4),
            dt=plan.dt, epsilon=plan.epsilon, delta=plan.delta, h=plan.h,
            y_power_integral=y_power,
        )

    def _simulate_block(self, model: SlowFastModel, sim: SimConfig, plan: StepPlan,
                        control: Optional[ControlFunction], centers: np.ndarray, first: int, count: int):
        n, d, m = model.dimensions.n, model.dimensions.d, model.dimensions.m
        generators = block_generators(sim.seed, first, count)
        x = np.tile(model.x0, (count, 1))
        y = np.tile(model.y0, (count, 1))
        records = plan.records
        x_rec = np.empty((count, len(records), n))
        y_rec = np.empty((count, len(records), d))
        eta_rec = np.empty((count, len(records), n))
        log_weights = np.zeros(count)
        energy = np.zeros(count)
        y_power = np.zeros(count)

        eps, delta, h, dt = plan.epsilon, plan.delta, plan.h, plan.dt
        slow_drift_scale = eps / delta
        fast_drift_scale = eps / (delta * delta)
        slow_noise = math.sqrt(eps)
        fast_noise = math.sqrt(eps) / delta
        deviation_scale = math.sqrt(eps) * h
        sqrt_dt = math.sqrt(dt)
        blow_up = self._settings.blow_up_threshold
        overflow = self._settings.weight_overflow

        def record(slot: int, step: int):
            x_rec[:, slot] = x
            y_rec[:, slot] = model.fast_argument(y)
            eta_rec[:, slot] = (x - centers[step]) / deviation_scale

        slot = 0
        if records[0] == 0:
            record(0, 0)
            slot = 1
        step = 0
        while step < plan.steps:
            chunk = min(self._settings.noise_chunk, plan.steps - step)
            increments = draw_normals(generators, chunk, 2 * m) * sqrt_dt
            for k in range(chunk):
                t = step * dt
                dW = increments[:, k, :m]
                dB = increments[:, k, m:]
                b = np.broadcast_to(model.b(x, y), (count, n))
                c = np.broadcast_to(model.c(x, y), (count, n))
                sigma = np.broadcast_to(model.sigma(x, y), (count, n, m))
                f = np.broadcast_to(model.f(x, y), (count, d))
                g = np.broadcast_to(model.g(x, y), (count, d))
                tau1 = np.broadcast_to(model.tau1(x, y), (count, d, m))
                tau2 = np.broadcast_to(model.tau2(x, y), (count, d, m))

                dx = (slow_drift_scale * b + c) * dt + slow_noise * np.einsum("pnm,pm->pn", sigma, dW)
                dy = (fast_drift_scale * f + g / delta) * dt + fast_noise * (
                    np.einsum("pdm,pm->pd", tau1, dW) + np.einsum("pdm,pm->pd", tau2, dB)
                )
                if control is not None:
                    eta = (x - centers[step]) / deviation_scale
                    u = np.asarray(control(t, x, y, eta), dtype=float).reshape(count, 2 * m)
                    u1, u2 = u[:, :m], u[:, m:]
                    dx = dx + slow_noise * h * np.einsum("pnm,pm->pn", sigma, u1) * dt
                    dy = dy + fast_noise * h * (
                        np.einsum("pdm,pm->pd", tau1, u1) + np.einsum("pdm,pm->pd", tau2, u2)
                    ) * dt
                    squared = np.sum(u * u, axis=1)
                    log_weights -= h * np.sum(u * increments[:, k, :], axis=1) + 0.5 * h * h * squared * dt
                    energy += squared * dt
                if sim.y_power is not None:
                    y_power += np.linalg.norm(model.fast_argument(y), axis=1) ** sim.y_power * dt

                x = x + dx
                y = y + dy
                step += 1
                size = np.max(np.abs(y), axis=1)
                if not np.all(np.isfinite(size)) or np.any(size > blow_up) or not np.all(np.isfinite(x)):
                    worst = float(np.nanmax(np.where(np.isfinite(size), size, np.inf)))
                    raise NumericalBlowUp(
                        f"Fast component exceeded {blow_up:.0e} at step {step} (t = {step * dt:.6g})",
                        step, step * dt, worst,
                    )
                if control is not None and np.any(log_weights > overflow):
                    worst = float(np.max(log_weights))
                    raise WeightOverflow(f"Girsanov log-weight {worst:.1f} exceeds {overflow}", worst, overflow)
                if slot < len(records) and records[slot] == step:
                    record(slot, step)
                    slot += 1
        return x_rec, y_rec, eta_rec, log_weights, energy, y_power

    # -- cross-checks -------------------------------------------------------------------------

    def controlled_limit_check(self, model: SlowFastModel, ingredients: RateIngredients, control: Sequence[float],
                               epsilons: Sequence[float], sim: SimConfig,
                               xbar: Optional[AveragedPath] = None) -> LimitCheckReport:
        """
        Compares the mean controlled deviation at t = 1 with psi_1, where
        psi' = int theta(X_bar, psi, y, u1, u2) mu(dy), psi_0 = 0, across eps.
        """
        m = model.dimensions.m
        control = np.asarray(control, dtype=float).reshape(2 * m)
        xbar = xbar or self.averaged_path(model)
        psi = self._limit_ode(model, ingredients, xbar, control[:m], control[m:])
        gaps: List[float] = []
        errors: List[float] = []
        for epsilon in epsilons:
            config = sim.model_copy(update={"epsilon": epsilon, "record_stride": 0})
            batch = self.simulate_controlled(model, config, constant_control(control), xbar)
            final = batch.final_eta
            means = np.array([compensated_mean(final[:, i]) for i in range(final.shape[1])])
            spread = final.std(axis=0, ddof=1) / math.sqrt(final.shape[0]) if final.shape[0] > 1 else np.zeros_like(means)
            worst = int(np.argmax(np.abs(means - psi)))
            gaps.append(float(abs(means[worst] - psi[worst])))
            errors.append(float(spread[worst]))
        # a gap may only grow within twice the combined sampling error of the two estimates
        monotone = all(
            gaps[k + 1] <= gaps[k] + 2.0 * math.hypot(errors[k], errors[k + 1]) for k in range(len(gaps) - 1)
        )
        allowed = max(3.0 * errors[-1], ValidationLimits.LIMIT_CHECK_RELATIVE_GAP * (1.0 + float(np.max(np.abs(psi)))))
        passed = monotone and gaps[-1] < allowed
        logger.info(f"Controlled limit check: gaps {gaps}, psi_1 {psi.tolist()}, passed={passed}")
        return LimitCheckReport(
            control=control.tolist(), epsilons=list(epsilons), gaps=gaps, std_errors=errors,
            psi_final=psi.tolist(), monotone=monotone, passed=passed,
        )

    def _limit_ode(self, model: SlowFastModel, ingredients: RateIngredients, xbar: AveragedPath,
                   z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
        """RK4 for the affine limit ODE; A and the forcing are interpolated linearly between nodes"""
        n = model.dimensions.n
        zero = np.zeros(n)
        A = []
        forcing = []
        for local in ingredients.nodes(xbar):
            A.append(local.kappa.A)
            forcing.append(self._rates.theta_average(model, local, zero, z1, z2))
        A, forcing = np.stack(A), np.stack(forcing)
        psi = np.zeros(n)
        times = xbar.times
        for k in range(times.size - 1):
            dt = times[k + 1] - times[k]
            A_mid = 0.5 * (A[k] + A[k + 1])
            e_mid = 0.5 * (forcing[k] + forcing[k + 1])
            k1 = A[k] @ psi + forcing[k]
            k2 = A_mid @ (psi + 0.5 * dt * k1) + e_mid
            k3 = A_mid @ (psi + 0.5 * dt * k2) + e_mid
            k4 = A[k + 1] @ (psi + dt * k3) + forcing[k + 1]
            psi = psi + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        return psi

    def y_moment_diagnostic(self, model: SlowFastModel, sim: SimConfig, power: float,
                            epsilons: Sequence[float]) -> MomentDiagnostic:
        """
        E int_0^1 |Y_s|^power ds per eps; flagged when the estimates grow
        with 1/eps beyond their sampling error, or a run blows up.
        """
        estimates: List[float] = []
        errors: List[float] = []
        for epsilon in epsilons:
            config = sim.model_copy(update={"epsilon": epsilon, "y_power": power, "record_stride": 0})
            try:
                batch = self.simulate_uncontrolled(model, config)
            except NumericalBlowUp as exc:
                logger.warning(f"Moment diagnostic blew up at eps={epsilon!r}: {exc.message}")
                estimates.append(math.inf)
                errors.append(math.inf)
                continue
            values = batch.y_power_integral
            estimates.append(compensated_mean(values))
            errors.append(float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0)

        finite = [k for k, value in enumerate(estimates) if math.isfinite(value) and value > 0]
        slope = 0.0
        if len(finite) >= 2:
            logs = np.log([estimates[k] for k in finite])
            scales = -np.log([epsilons[k] for k in finite])
            slope = float(np.polyfit(scales, logs, 1)[0])
        flagged = len(finite) < len(estimates)
        if not flagged and len(finite) >= 2:
            first, last = finite[0], finite[-1]
            growth = estimates[last] - estimates[first]
            noise = math.hypot(errors[first], errors[last])
            flagged = slope > ValidationLimits.GROWTH_SLOPE_TOLERANCE and growth > 3.0 * noise
        return MomentDiagnostic(power=power, epsilons=list(epsilons), estimates=estimates,
                                std_errors=errors, slope=slope, flagged=flagged)
