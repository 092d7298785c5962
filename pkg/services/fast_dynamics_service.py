"""
Invariant measure of the frozen fast process and the action of its
generator on gridded functions.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import sympy

from core.config import NumericsSettings
from core.validation import ValidationLimits
from exceptions.model_exceptions import UnsupportedDimension
from exceptions.numerics_exceptions import (
    GridMismatch,
    GridTooCoarse,
    NonEllipticDiffusion,
    TailDominates,
    TruncationTooSmall,
)
from models.grid import Grid1D, GridKind
from models.invariant_density import InvariantDensity
from models.slow_fast_model import SlowFastModel
from utils.quadrature import adaptive_cell_integrals, cumulative_simpson, trapezoid_cell_integrals

logger = logging.getLogger(__name__)

TestFunction = sympy.Expr
TEST_VARIABLE = sympy.Symbol("y", real=True)


class FastDynamicsService:
    """Builds and certifies invariant densities; applies the averaging generator"""

    def __init__(self, settings: NumericsSettings):
        self._settings = settings

    # -- grids ---------------------------------------------------------------

    def default_grid(self, model: SlowFastModel, nodes: Optional[int] = None,
                     half_width: Optional[float] = None) -> Grid1D:
        count = nodes or self._settings.grid_nodes
        kind = model.fast_space.kind
        if kind == GridKind.torus.value:
            return Grid1D.torus(model.fast_space.period, count)
        if kind == GridKind.half_line.value:
            return Grid1D.half_line(self._settings.half_line_lower,
                                    half_width or self._settings.half_line_upper, count)
        return Grid1D.line(half_width or self._settings.line_half_width, count)

    # -- densities -------------------------------------------------------------

    def invariant_density(self, model: SlowFastModel, x, grid: Optional[Grid1D] = None) -> InvariantDensity:
        """1-D density, or a product density for separable fast spaces"""
        d = model.dimensions.d
        if d == 1:
            return self.invariant_density_1d(model, x, grid)
        if not model.fast_space.separable:
            raise UnsupportedDimension(
                "Invariant densities for non-separable fast spaces with d > 1 are not supported", d
            )
        factors = [self._component_density(model, x, grid, index) for index in range(d)]
        return self.invariant_density_product(factors)

    def invariant_density_1d(self, model: SlowFastModel, x, grid: Optional[Grid1D] = None) -> InvariantDensity:
        """
        Speed-measure density m ~ exp(int 2 f/a) / a of the regime-effective
        generator. Without an explicit grid the truncation is doubled until the
        estimated excluded mass is below tolerance.
        """
        if model.dimensions.d != 1:
            raise UnsupportedDimension("invariant_density_1d needs a one-dimensional fast variable",
                                       model.dimensions.d)
        return self._component_density(model, x, grid, 0)

    def invariant_density_product(self, factors: Sequence[InvariantDensity]) -> InvariantDensity:
        """Tensor product of one-dimensional factor densities"""
        if not factors:
            raise GridMismatch("A product density needs at least one factor", 1, 0)
        values = factors[0].values
        grids = list(factors[0].grids)
        for factor in factors[1:]:
            values = np.multiply.outer(values, factor.values)
            grids.extend(factor.grids)
        surviving = math.prod(1.0 - factor.mass_defect for factor in factors)
        return InvariantDensity(
            grids=tuple(grids),
            values=values,
            log_normalizer=float(sum(factor.log_normalizer for factor in factors)),
            mass_defect=float(1.0 - surviving),
            flux=float(max(abs(factor.flux) for factor in factors)),
        )

    def _component_density(self, model: SlowFastModel, x, grid: Optional[Grid1D], index: int) -> InvariantDensity:
        x = np.asarray(x, dtype=float)
        tolerance = self._settings.tail_mass_tolerance
        if grid is not None:
            density = self._density_on_grid(model, x, grid, index)
            if density.mass_defect >= tolerance:
                raise TruncationTooSmall(
                    f"Estimated mass outside the grid {density.mass_defect:.3e} exceeds {tolerance:.1e}",
                    density.mass_defect, tolerance,
                )
            return density

        grid = self.default_grid(model)
        for attempt in range(self._settings.max_truncation_doublings + 1):
            density = self._density_on_grid(model, x, grid, index)
            if grid.is_periodic or density.mass_defect < tolerance:
                return density
            logger.info(
                f"Mass defect {density.mass_defect:.3e} on [{grid.lower}, {grid.upper}]; doubling the truncation"
            )
            if grid.kind == GridKind.half_line:
                grid = Grid1D.half_line(grid.lower, 2.0 * grid.upper, grid.size)
            else:
                grid = Grid1D.line(2.0 * grid.upper, grid.size)
        raise TruncationTooSmall(
            f"Mass defect {density.mass_defect:.3e} still exceeds {tolerance:.1e} after "
            f"{self._settings.max_truncation_doublings} doublings",
            density.mass_defect, tolerance,
        )

    def _density_on_grid(self, model: SlowFastModel, x: np.ndarray, grid: Grid1D, index: int) -> InvariantDensity:
        drift, diffusion = self._coefficients_on_grid(model, x, grid, index)
        self._check_diffusion(model, grid, diffusion)

        def ratio(points: np.ndarray) -> np.ndarray:
            f_val, a_val = self._coefficients_at(model, x, points, index)
            return 2.0 * f_val / a_val

        edges = grid.edges
        if self._settings.log_density_rule == "trapezoid":
            edge_ratio = 2.0 * drift / diffusion
            if grid.is_periodic:
                edge_ratio = np.append(edge_ratio, edge_ratio[0])
            cells = trapezoid_cell_integrals(edge_ratio, edges)
        else:
            cells = adaptive_cell_integrals(ratio, edges)
        potential = np.concatenate([[0.0], np.cumsum(cells)])

        if grid.is_periodic:
            weight, flux_factor = self._periodic_weight(potential, grid)
        else:
            weight, flux_factor = potential[: grid.size], None

        log_unnormalized = weight - np.log(np.where(diffusion > 0, diffusion, np.inf))
        shift = float(np.max(log_unnormalized))
        unnormalized = np.exp(log_unnormalized - shift)
        total = float(grid.integrate(unnormalized))
        values = unnormalized / total
        flux = 0.0
        if flux_factor is not None:
            # stationary current: 1/2 (a m)' - f m = -J
            flux = float(flux_factor * math.exp(-shift) / (2.0 * total))
        mass_defect = self._mass_defect(grid, values)
        return InvariantDensity(
            grids=(grid,),
            values=values,
            log_normalizer=float(math.log(total) + shift),
            mass_defect=mass_defect,
            flux=flux,
        )

    @staticmethod
    def _periodic_weight(potential: np.ndarray, grid: Grid1D):
        """
        log of e^Psi [1 - (1 - e^(-Psi_P)) I(y) / I_P] with I(y) = int_0^y e^-Psi;
        reduces to Psi when Psi is periodic (zero flux). Also returns the
        factor turning the normalizing integral into the stationary current.
        """
        closing = float(potential[-1])
        base = float(np.min(potential))
        integrand = np.exp(-(potential - base))
        running = cumulative_simpson(integrand, grid.spacing)
        full = float(running[-1])
        bracket = 1.0 - (1.0 - math.exp(-closing)) * running / full
        weight = potential + np.log(bracket)
        flux_factor = (1.0 - math.exp(-closing)) / (full * math.exp(-base))
        return weight[: grid.size], flux_factor

    def _mass_defect(self, grid: Grid1D, values: np.ndarray) -> float:
        if grid.is_periodic:
            return 0.0
        fit = ValidationLimits.TAIL_FIT_NODES
        upper = self._exponential_tail(grid.nodes[-fit:], values[-fit:], right=True)
        if grid.kind == GridKind.half_line:
            lower = float(values[0] * grid.lower)
        else:
            lower = self._exponential_tail(grid.nodes[:fit], values[:fit], right=False)
        return float(upper + lower)

    @staticmethod
    def _exponential_tail(nodes: np.ndarray, values: np.ndarray, right: bool) -> float:
        if np.all(values <= 0):
            return 0.0
        positive = np.maximum(values, np.finfo(float).tiny)
        slope = float(np.polyfit(nodes, np.log(positive), 1)[0])
        decay = -slope if right else slope
        edge = float(positive[-1] if right else positive[0])
        if decay <= 0:
            raise TruncationTooSmall(
                "Density does not decay at the truncation boundary", float("inf"), None
            )
        return edge / decay

    def _check_diffusion(self, model: SlowFastModel, grid: Grid1D, diffusion: np.ndarray):
        bad = np.flatnonzero(~(diffusion > 0))
        if bad.size == 0:
            return
        if model.degenerate_ok and grid.kind == GridKind.half_line and np.all((bad == 0) | (bad == grid.size - 1)):
            return
        k = int(bad[0])
        raise NonEllipticDiffusion(
            f"Effective fast diffusion is {diffusion[k]:.3e} at y = {grid.nodes[k]:.6g}",
            float(grid.nodes[k]), float(diffusion[k]),
        )

    # -- coefficients ------------------------------------------------------------

    def _coefficients_at(self, model: SlowFastModel, x: np.ndarray, points: np.ndarray, index: int):
        points = np.asarray(points, dtype=float).reshape(-1)
        y = np.zeros((points.size, model.dimensions.d))
        y[:, index] = points
        x_row = x.reshape(1, -1)
        drift = model.effective_fast_drift(x_row, y)[:, index]
        diffusion = model.effective_fast_diffusion(x_row, y)[:, index, index]
        return drift, diffusion

    def _coefficients_on_grid(self, model: SlowFastModel, x: np.ndarray, grid: Grid1D, index: int = 0):
        return self._coefficients_at(model, np.asarray(x, dtype=float), grid.nodes, index)

    def coefficients_on_grid(self, model: SlowFastModel, x, grid: Grid1D):
        """Effective drift and diffusion of a one-dimensional fast variable at the grid nodes"""
        return self._coefficients_on_grid(model, np.asarray(x, dtype=float), grid, 0)

    def coefficients_at(self, model: SlowFastModel, x, points: np.ndarray):
        """Same as coefficients_on_grid at arbitrary fast states such as cell faces"""
        return self._coefficients_at(model, np.asarray(x, dtype=float), points, 0)

    # -- generator -------------------------------------------------------------------

    def apply_generator(self, model: SlowFastModel, x, values: np.ndarray, grid: Grid1D) -> np.ndarray:
        """
        L u = f u' + 1/2 a u'' with second-order central differences; wraps on
        the torus and uses one-sided second-order differences at truncation
        boundaries (those nodes fall outside the trusted mask).
        """
        values = np.asarray(values, dtype=float)
        if values.shape[0] < ValidationLimits.MIN_GRID_NODES:
            raise GridTooCoarse(f"The generator needs at least {ValidationLimits.MIN_GRID_NODES} nodes",
                                values.shape[0])
        if values.shape[0] != grid.size:
            raise GridMismatch("Gridded function does not match the grid", grid.size, values.shape[0])
        drift, diffusion = self.coefficients_on_grid(model, x, grid)
        first, second = self.central_derivatives(values, grid)
        shape = (-1,) + (1,) * (values.ndim - 1)
        return drift.reshape(shape) * first + 0.5 * diffusion.reshape(shape) * second

    @staticmethod
    def central_derivatives(values: np.ndarray, grid: Grid1D):
        h = grid.spacing
        if grid.is_periodic:
            ahead, behind = np.roll(values, -1, axis=0), np.roll(values, 1, axis=0)
            return (ahead - behind) / (2.0 * h), (ahead - 2.0 * values + behind) / (h * h)
        first = np.gradient(values, h, axis=0, edge_order=2)
        second = np.empty_like(values)
        second[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / (h * h)
        second[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / (h * h)
        second[-1] = (2.0 * values[-1] - 5.0 * values[-2] + 4.0 * values[-3] - values[-4]) / (h * h)
        return first, second

    # -- certificates -------------------------------------------------------------------

    def default_test_functions(self, density: InvariantDensity) -> List[TestFunction]:
        """Five smooth, rapidly decaying (or periodic) functions of TEST_VARIABLE adapted to the density"""
        grid = density.grid
        y = TEST_VARIABLE
        if grid.is_periodic:
            omega = 2 * sympy.pi / sympy.Float(grid.period)
            return [sympy.sin(omega * y), sympy.cos(omega * y), sympy.sin(2 * omega * y),
                    sympy.cos(2 * omega * y), sympy.sin(3 * omega * y)]
        mean = float(density.integrate(grid.nodes))
        spread = math.sqrt(max(float(density.integrate((grid.nodes - mean) ** 2)), 1e-12))
        z = (y - mean) / spread
        return [z ** power * sympy.exp(-z ** 2 / 2) for power in range(5)]

    def stationarity_check(self, density: InvariantDensity, model: SlowFastModel, x,
                           test_functions: Optional[List[TestFunction]] = None) -> float:
        """max |int L F dmu| over the family; F' and F'' are exact symbolic derivatives"""
        grid = density.grid
        functions = test_functions or self.default_test_functions(density)
        drift, diffusion = self.coefficients_on_grid(model, x, grid)
        worst = 0.0
        for func in functions:
            first = sympy.lambdify(TEST_VARIABLE, sympy.diff(func, TEST_VARIABLE), modules="numpy")
            second = sympy.lambdify(TEST_VARIABLE, sympy.diff(func, TEST_VARIABLE, 2), modules="numpy")
            generated = drift * first(grid.nodes) + 0.5 * diffusion * second(grid.nodes)
            worst = max(worst, abs(float(density.integrate(generated))))
        return worst

    def density_moment(self, density: InvariantDensity, k: float) -> float:
        """int |y|^k dmu, refusing integrands that have not decayed at a truncation boundary"""
        if k < 0:
            raise ValueError("Moment order must be nonnegative")
        mesh = density.mesh()
        radius = np.linalg.norm(mesh, axis=-1)
        integrand = radius ** k if k > 0 else np.ones_like(radius)
        weighted = integrand * density.values
        peak = float(np.max(np.abs(weighted)))
        for axis, grid in enumerate(density.grids):
            if grid.is_periodic:
                continue
            ends = [-1] if grid.kind == GridKind.half_line else [0, -1]
            for end in ends:
                edge = float(np.max(np.abs(np.take(weighted, end, axis=axis))))
                if peak > 0 and edge > ValidationLimits.TAIL_RATIO_TOLERANCE * peak:
                    raise TailDominates(
                        f"|y|^{k} m(y) has not decayed at the truncation (ratio {edge / peak:.3e})",
                        k, edge / peak,
                    )
        return float(density.integrate(integrand))
