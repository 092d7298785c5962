"""
Admissibility checks for slow-fast models: exact exponent inequalities,
scan-based recurrence and growth evidence, scale-ratio limits.
"""

import logging
import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.config import NumericsSettings
from core.validation import ValidationLimits
from exceptions.model_exceptions import DegenerateScan, DivergentLimit, EmptyProbeSet, MissingScalingFamily
from models.slow_fast_model import SlowFastModel
from schemas.model_config import GrowthErgodicityParams, RegimeScaling
from schemas.reports import ConditionReport, ConditionVerdict

logger = logging.getLogger(__name__)


def _positive_part(value: Fraction) -> Fraction:
    return value if value >= 0 else Fraction(0)


def _exact(value: float) -> Fraction:
    return Fraction(str(value))


class ConditionService:
    """
    Evaluates the growth, recurrence, tightness, ellipticity and centering
    conditions of a model and assembles them into a ConditionReport.
    """

    def __init__(self, settings: NumericsSettings, fast_dynamics_service=None):
        self._settings = settings
        self._fast_dynamics = fast_dynamics_service

    # -- exact checks -----------------------------------------------------

    def check_tightness(self, params: GrowthErgodicityParams, regime: RegimeScaling) -> ConditionReport:
        """Both max-inequalities in exact rational arithmetic: first group <= r, second group < r"""
        q_b, q_c, q_sigma, r = (_exact(v) for v in (params.q_b, params.q_c, params.q_sigma, params.r))
        q_bc = max(q_b, q_c)
        if regime.regime == 1:
            q_lead = max(q_b, q_c, _positive_part(q_b + 1 - r))
            lead_name = "q_F"
        else:
            q_lead = q_bc
            lead_name = "q_bc"
        first_terms = {
            f"({lead_name}+1-r)^+ + q_bc": _positive_part(q_lead + 1 - r) + q_bc,
            f"({lead_name}+2(1-r))^+ + q_bc": _positive_part(q_lead + 2 * (1 - r)) + q_bc,
            f"({lead_name}+1-r)^+ + 2q_sigma": _positive_part(q_lead + 1 - r) + 2 * q_sigma,
            f"({lead_name}+2(1-r))^+ + 2q_sigma": _positive_part(q_lead + 2 * (1 - r)) + 2 * q_sigma,
            f"({lead_name}+3(1-r))^+ + 2q_sigma": _positive_part(q_lead + 3 * (1 - r)) + 2 * q_sigma,
        }
        second_terms = {
            lead_name: q_lead,
            "q_sigma": q_sigma,
            f"({lead_name}+1-r)^+": _positive_part(q_lead + 1 - r),
        }
        first_name, first_max = max(first_terms.items(), key=lambda item: item[1])
        second_name, second_max = max(second_terms.items(), key=lambda item: item[1])
        detail = f"regime {regime.regime}: max first group = {first_max}, max second group = {second_max}, r = {r}"
        if first_max > r:
            verdict = ConditionVerdict(
                status="fail", evidence="exact", detail=detail,
                witness={"inequality": f"{first_name} <= r", "lhs": str(first_max), "r": str(r)},
            )
        elif second_max >= r:
            verdict = ConditionVerdict(
                status="fail", evidence="exact", detail=detail,
                witness={"inequality": f"{second_name} < r", "lhs": str(second_max), "r": str(r)},
            )
        else:
            verdict = ConditionVerdict(status="pass", evidence="exact", detail=detail)
        return ConditionReport(verdicts={"tightness": verdict})

    def limit_constants_from_family(self, regime: RegimeScaling) -> float:
        """
        j1 = lim (delta/eps)/(sqrt(eps) h) in Regime 1; j2 = lim (eps/delta - gamma)/(sqrt(eps) h)
        in Regime 2, which is zero for the exact family delta = c_delta * eps.
        """
        family = regime.scaling_family
        if family is None:
            raise MissingScalingFamily("Limit constants need a scaling family", "scaling_family")
        if regime.regime == 2:
            return 0.0
        gap = (family.exact("p") - 1) - (Fraction(1, 2) - family.exact("q_h"))
        if gap < 0:
            raise DivergentLimit(
                f"(delta/eps)/(sqrt(eps) h) diverges: p - 1 = {family.p - 1} < 1/2 - q_h = {0.5 - family.q_h}",
                float(gap),
            )
        return float(family.c_delta) if gap == 0 else 0.0

    def resolve_regime(self, regime: RegimeScaling) -> RegimeScaling:
        """Fill j1 / gamma / j2 from the scaling family where they were not given"""
        updates: Dict[str, float] = {}
        if regime.regime == 1 and regime.j1 is None:
            updates["j1"] = self.limit_constants_from_family(regime) if regime.scaling_family else 0.0
        if regime.regime == 2:
            if regime.gamma is None:
                updates["gamma"] = regime.effective_gamma
            if regime.j2 is None:
                updates["j2"] = self.limit_constants_from_family(regime) if regime.scaling_family else 0.0
        return regime.model_copy(update=updates) if updates else regime

    # -- scan-based checks ---------------------------------------------------

    def check_recurrence_scan(self, model: SlowFastModel, y_radius: float,
                              x_probes: Sequence[Sequence[float]], grid_points: int) -> ConditionReport:
        """
        Scans y . (regime drift) <= -Gamma |y|^(r+1) for R < |y| <= y_radius
        along the coordinate axes and the diagonals.
        """
        if not x_probes:
            raise EmptyProbeSet()
        params = model.exponents
        if model.fast_space.kind == "torus":
            verdict = ConditionVerdict(status="unchecked", evidence="none",
                                       detail="compact fast space: recurrence not required")
            return ConditionReport(verdicts={"recurrence": verdict})
        if y_radius <= params.recurrence_radius or grid_points < 2:
            raise DegenerateScan(
                f"Scan radius {y_radius} must exceed R = {params.recurrence_radius} with at least 2 points",
                (params.recurrence_radius, y_radius),
            )
        radii = np.linspace(params.recurrence_radius, y_radius, grid_points + 1)[1:]
        directions = self._directions(model.dimensions.d, model.is_half_line)
        points = (radii[:, None, None] * directions[None, :, :]).reshape(-1, model.dimensions.d)
        norms = np.linalg.norm(points, axis=-1)
        bound = -params.recurrence_gamma * norms ** (params.r + 1)
        for x in x_probes:
            x_arr = np.asarray(x, dtype=float).reshape(1, -1)
            drift = model.effective_fast_drift(x_arr, points)
            value = np.sum(points * drift, axis=-1)
            slack = 1e-12 * (1.0 + np.abs(bound))
            violated = np.flatnonzero(~(value <= bound + slack))
            if violated.size:
                k = int(violated[0])
                witness = {
                    "x": [float(v) for v in x_arr.ravel()],
                    "y": [float(v) for v in points[k]],
                    "y_dot_drift": float(value[k]),
                    "bound": float(bound[k]),
                }
                logger.info(f"Recurrence scan failed for model {model.name} at y={points[k]}")
                verdict = ConditionVerdict(status="fail", evidence="scan",
                                           detail="y . drift exceeds -Gamma |y|^(r+1)", witness=witness)
                return ConditionReport(verdicts={"recurrence": verdict})
        verdict = ConditionVerdict(
            status="pass", evidence="scan",
            detail=f"scan-based: {len(x_probes)} slow states, {points.shape[0]} y points up to |y| = {y_radius}",
        )
        return ConditionReport(verdicts={"recurrence": verdict})

    def check_growth_scan(self, model: SlowFastModel, box: Tuple[Sequence[float], Sequence[float]],
                          grid_points: int, y_radius: Optional[float] = None) -> ConditionReport:
        """
        Log-log regression of the running sup-envelope of |b| + |grad_x b|,
        |c| + |grad_x c|, |sigma| and |g| against |y|, compared with the declared
        exponents (slope tolerance 0.1). The x box is sampled along its diagonal.
        """
        lower = np.asarray(box[0], dtype=float).reshape(-1)
        upper = np.asarray(box[1], dtype=float).reshape(-1)
        if lower.shape != upper.shape or np.any(upper <= lower) or grid_points < 2:
            raise DegenerateScan(f"Scan box [{lower}, {upper}] has no interior", (lower.tolist(), upper.tolist()))
        if model.fast_space.kind == "torus":
            verdicts = {
                f"growth.{name}": ConditionVerdict(status="unchecked", evidence="none",
                                                   detail="compact fast space: coefficients bounded in y")
                for name in ("b", "c", "sigma", "g")
            }
            return ConditionReport(verdicts=verdicts)

        y_radius = y_radius or ValidationLimits.DEFAULT_SCAN_RADIUS
        radii = np.logspace(0.0, math.log10(y_radius), ValidationLimits.DEFAULT_SCAN_POINTS)
        directions = self._directions(model.dimensions.d, model.is_half_line)
        points = (radii[:, None, None] * directions[None, :, :]).reshape(-1, model.dimensions.d)
        xs = lower + np.linspace(0.0, 1.0, grid_points)[:, None] * (upper - lower)

        params = model.exponents
        declared = {"b": params.q_b, "c": params.q_c, "sigma": params.q_sigma, "g": 0.0}
        coefficients = {
            "b": (model.b, model.coefficients.grad_b),
            "c": (model.c, model.coefficients.grad_c),
            "sigma": (model.sigma, None),
            "g": (model.g, None),
        }
        verdicts: Dict[str, ConditionVerdict] = {}
        for name, (func, gradient) in coefficients.items():
            sizes = np.zeros(points.shape[0])
            for x in xs:
                x_row = x.reshape(1, -1)
                value = self._norm(func(x_row, points))
                if name in ("b", "c"):
                    value = value + self._gradient_norm(model, func, gradient, x, points)
                sizes = np.maximum(sizes, value)
            envelope = np.maximum.accumulate(sizes.reshape(radii.size, -1).max(axis=1))
            verdicts[f"growth.{name}"] = self._growth_verdict(name, radii, envelope, declared[name], model)
        return ConditionReport(verdicts=verdicts)

    # -- aggregate ------------------------------------------------------------

    def validate_model(self, model: SlowFastModel, x_probes: Optional[List[Sequence[float]]] = None,
                       y_radius: Optional[float] = None) -> ConditionReport:
        """Every condition the model can be checked against, in one report"""
        logger.info(f"Validating model {model.name} (regime {model.regime_index})")
        states = x_probes or [model.x0.tolist()]
        report = self.check_tightness(model.exponents, model.regime)
        radius = y_radius or max(ValidationLimits.DEFAULT_SCAN_RADIUS ** 0.5, 2.0 * model.exponents.recurrence_radius)
        report = report.merge(self.check_recurrence_scan(model, radius, states, ValidationLimits.DEFAULT_SCAN_POINTS))
        x0 = np.asarray(states[0], dtype=float)
        report = report.merge(self.check_growth_scan(model, (x0 - 1.0, x0 + 1.0), 5))
        report = report.merge(self._ellipticity(model, states))
        report = report.merge(self._scaling(model))
        strong = (
            ConditionVerdict(status="pass", evidence="declared", detail="strong solution declared")
            if model.exponents.strong_solution_declared
            else ConditionVerdict(status="unchecked", evidence="none", detail="strong solution not declared")
        )
        report = report.merge(ConditionReport(verdicts={"strong_solution": strong}))
        if model.regime_index == 1 and self._fast_dynamics is not None:
            report = report.merge(self._centering(model, states))
        logger.info(f"Validation of {model.name} finished: passed={report.passed}")
        return report

    # -- helpers ----------------------------------------------------------------

    def _scaling(self, model: SlowFastModel) -> ConditionReport:
        regime = model.regime
        if regime.scaling_family is None:
            verdict = ConditionVerdict(status="unchecked", evidence="declared",
                                       detail="limit constants supplied directly")
        else:
            try:
                value = self.limit_constants_from_family(regime)
                verdict = ConditionVerdict(status="pass", evidence="exact", detail=f"limit constant = {value!r}")
            except DivergentLimit as exc:
                verdict = ConditionVerdict(status="fail", evidence="exact", detail=exc.message,
                                           witness={"exponent_gap": exc.exponent_gap})
        return ConditionReport(verdicts={"scaling": verdict})

    def _ellipticity(self, model: SlowFastModel, states: List[Sequence[float]]) -> ConditionReport:
        if model.degenerate_ok:
            verdict = ConditionVerdict(status="unchecked", evidence="declared",
                                       detail="degenerate fast diffusion accepted; theorem coverage not claimed")
            return ConditionReport(verdicts={"ellipticity": verdict})
        params = model.exponents
        grid = self._fast_dynamics.default_grid(model) if self._fast_dynamics else None
        nodes = grid.nodes if grid is not None else np.linspace(-10.0, 10.0, 201)
        y = nodes.reshape(-1, 1) * np.ones((1, model.dimensions.d))
        for x in states:
            covariance = model.fast_noise_covariance(np.asarray(x, dtype=float).reshape(1, -1), y)
            eigenvalues = np.linalg.eigvalsh(0.5 * (covariance + np.swapaxes(covariance, -1, -2)))
            low, high = eigenvalues[:, 0], eigenvalues[:, -1]
            tolerance = 1e-10 * max(1.0, params.beta2)
            bad = np.flatnonzero((low < params.beta1 - tolerance) | (high > params.beta2 + tolerance))
            if bad.size:
                k = int(bad[0])
                witness = {"x": list(map(float, np.ravel(x))), "y": float(nodes[k]),
                           "min_eigenvalue": float(low[k]), "max_eigenvalue": float(high[k]),
                           "beta1": params.beta1, "beta2": params.beta2}
                verdict = ConditionVerdict(status="fail", evidence="scan",
                                           detail="fast noise covariance leaves [beta1, beta2]", witness=witness)
                return ConditionReport(verdicts={"ellipticity": verdict})
        verdict = ConditionVerdict(status="pass", evidence="scan", detail="eigenvalues within [beta1, beta2]")
        return ConditionReport(verdicts={"ellipticity": verdict})

    def _centering(self, model: SlowFastModel, states: List[Sequence[float]]) -> ConditionReport:
        tolerance = self._settings.fredholm_tolerance
        for x in states:
            x_arr = np.asarray(x, dtype=float)
            density = self._fast_dynamics.invariant_density(model, x_arr)
            x_row, y = model.on_grid(x_arr, density.grid.nodes)
            means = density.integrate(model.b(x_row, y))
            worst = int(np.argmax(np.abs(means)))
            if abs(means[worst]) >= tolerance:
                verdict = ConditionVerdict(
                    status="fail", evidence="scan", detail="homogenization drift b is not centered",
                    witness={"x": x_arr.tolist(), "component": worst + 1, "mean": float(means[worst])},
                )
                return ConditionReport(verdicts={"centering": verdict})
        verdict = ConditionVerdict(status="pass", evidence="scan", detail="|int b dmu| below tolerance")
        return ConditionReport(verdicts={"centering": verdict})

    def _growth_verdict(self, name: str, radii: np.ndarray, envelope: np.ndarray,
                        declared: float, model: SlowFastModel) -> ConditionVerdict:
        if name == "g" and model.coefficients.g_bound is not None:
            worst = float(envelope[-1])
            if worst > model.coefficients.g_bound * (1 + 1e-12):
                return ConditionVerdict(status="fail", evidence="scan", detail="g exceeds its declared bound",
                                        witness={"radius": float(radii[-1]), "sup": worst,
                                                 "g_bound": model.coefficients.g_bound})
            return ConditionVerdict(status="pass", evidence="scan", detail=f"sup |g| = {worst!r}")
        if not np.all(np.isfinite(envelope)):
            return ConditionVerdict(status="fail", evidence="scan", detail=f"{name} is not finite on the scan",
                                    witness={"radius": float(radii[int(np.argmin(np.isfinite(envelope)))])})
        slope = float(np.polyfit(np.log(radii), np.log(1.0 + envelope), 1)[0])
        detail = f"scan-based log-log slope {slope:.4f}, declared exponent {declared}"
        if slope > declared + ValidationLimits.GROWTH_SLOPE_TOLERANCE:
            return ConditionVerdict(status="fail", evidence="scan", detail=detail,
                                    witness={"slope": slope, "declared": declared,
                                             "radius": float(radii[-1]), "envelope": float(envelope[-1])})
        return ConditionVerdict(status="pass", evidence="scan", detail=detail)

    def _gradient_norm(self, model: SlowFastModel, func, gradient, x: np.ndarray, points: np.ndarray) -> np.ndarray:
        """|grad_x| from the symbolic Jacobian, or a central difference for hand-built callables"""
        x_row = x.reshape(1, -1)
        if gradient is not None:
            return self._norm(model.evaluate(gradient, x_row, points))
        total = np.zeros(points.shape[0])
        step = self._settings.gradient_step * (1.0 + float(np.max(np.abs(x))))
        for k in range(x.size):
            shift = np.zeros_like(x)
            shift[k] = step
            partial = (func((x + shift).reshape(1, -1), points) - func((x - shift).reshape(1, -1), points)) / (2.0 * step)
            total = total + self._norm(partial) ** 2
        return np.sqrt(total)

    @staticmethod
    def _norm(values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        flat = values.reshape(values.shape[0], -1) if values.ndim > 1 else values.reshape(-1, 1)
        return np.linalg.norm(flat, axis=1)

    @staticmethod
    def _directions(d: int, half_line: bool) -> np.ndarray:
        axes = np.eye(d)
        diagonal = np.ones((1, d)) / math.sqrt(d)
        positive = np.vstack([axes, diagonal]) if d > 1 else axes
        if half_line:
            return positive
        return np.vstack([positive, -positive])
