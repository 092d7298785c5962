"""
One-dimensional Poisson solvers for L u = -F, int u dmu = 0.

QuadraturePoissonSolver integrates the flux form (1/2 a m u')' = -F m
directly. FiniteDifferencePoissonSolver assembles a banded central-difference
operator on lines and tori, and a fourth-order finite-volume discretization
of the flux form on half-lines, where the lower end may be a degenerate
entrance boundary. Both systems are bordered by the centering constraint.
"""

import logging
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from core.config import NumericsSettings
from exceptions.numerics_exceptions import DegenerateDiffusion, FredholmViolation, GridMismatch, SingularSystem
from models.corrector import CorrectorSolution
from models.grid import Grid1D, GridKind
from models.invariant_density import InvariantDensity
from models.slow_fast_model import SlowFastModel
from services.fast_dynamics_service import FastDynamicsService
from services.interfaces.poisson_solver import PoissonSolverInterface
from utils.quadrature import cumulative_simpson

logger = logging.getLogger(__name__)

_ZERO_FLUX = 1e-10

# central stencils: offsets and weights (before dividing by h or h^2)
_STENCILS = {
    2: ((-1, 0, 1), (-0.5, 0.0, 0.5), (1.0, -2.0, 1.0)),
    4: ((-2, -1, 0, 1, 2),
        (1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0),
        (-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0)),
}

# fourth-order one-sided closures for the two nodes next to a boundary
_FIRST_CLOSURES = ((-25.0, 48.0, -36.0, 16.0, -3.0), (-3.0, -10.0, 18.0, -6.0, 1.0))
_SECOND_CLOSURES = ((35.0, -104.0, 114.0, -56.0, 11.0), (11.0, -20.0, 6.0, 4.0, -1.0))

# finite volumes: derivative and value at a cell face from the four nearest
# nodes, and the integral over the half cell at a boundary node
_FACE_SLOPE = np.array([1.0, -27.0, 27.0, -1.0]) / 24.0
_FACE_SLOPE_EDGE = np.array([-23.0, 21.0, 3.0, -1.0]) / 24.0
_FACE_VALUE = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0
_FACE_VALUE_EDGE = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0
_HALF_CELL = np.array([119.0, 107.0, -43.0, 9.0]) / 384.0


def fourth_order_derivatives(values: np.ndarray, grid: Grid1D) -> Tuple[np.ndarray, np.ndarray]:
    """Five-point first and second derivatives; NaN where the stencil leaves a truncated grid"""
    offsets, first_w, second_w = _STENCILS[4]
    h = grid.spacing
    first = np.zeros_like(values)
    second = np.zeros_like(values)
    for offset, w1, w2 in zip(offsets, first_w, second_w):
        shifted = np.roll(values, -offset, axis=0)
        first = first + w1 * shifted
        second = second + w2 * shifted
    first, second = first / h, second / (h * h)
    if not grid.is_periodic:
        first[:2] = first[-2:] = np.nan
        second[:2] = second[-2:] = np.nan
    return first, second


def one_sided_operators(size: int, h: float):
    """Fourth-order first and second derivative matrices with one-sided rows at both ends"""
    first = sparse.lil_matrix((size, size))
    second = sparse.lil_matrix((size, size))
    offsets, first_w, second_w = _STENCILS[4]
    for row in range(2, size - 2):
        for offset, w1, w2 in zip(offsets, first_w, second_w):
            first[row, row + offset] = w1 / h
            second[row, row + offset] = w2 / (h * h)
    for row, (w1, w2) in enumerate(zip(_FIRST_CLOSURES, _SECOND_CLOSURES)):
        start = row - 1 if row == 1 else 0
        mirror = size - 1 - row
        for k in range(5):
            first[row, start + k] = w1[k] / (12.0 * h)
            second[row, start + k] = w2[k] / (12.0 * h * h)
            first[mirror, mirror - (start + k - row)] = -w1[k] / (12.0 * h)
            second[mirror, mirror - (start + k - row)] = w2[k] / (12.0 * h * h)
    return first.tocsr(), second.tocsr()


def extrapolate_ends(values: np.ndarray) -> np.ndarray:
    """Replace the two end rows by cubic extrapolation from their four neighbours"""
    values = np.array(values, dtype=float)
    values[0] = 4.0 * values[1] - 6.0 * values[2] + 4.0 * values[3] - values[4]
    values[-1] = 4.0 * values[-2] - 6.0 * values[-3] + 4.0 * values[-4] - values[-5]
    return values


class _PoissonSolverBase(PoissonSolverInterface):

    def __init__(self, settings: NumericsSettings, fast_dynamics_service: FastDynamicsService):
        self._settings = settings
        self._fast_dynamics = fast_dynamics_service

    def _prepare(self, model: SlowFastModel, x: np.ndarray, rhs: np.ndarray, density: InvariantDensity):
        grid = density.grid
        rhs = np.asarray(rhs, dtype=float)
        if rhs.ndim == 1:
            rhs = rhs[:, None]
        if rhs.shape[0] != grid.size:
            raise GridMismatch("Right-hand side does not live on the density grid", grid.size, rhs.shape[0])
        means = density.integrate(rhs)
        for component, value in enumerate(np.atleast_1d(means)):
            if abs(value) > self._settings.fredholm_tolerance:
                raise FredholmViolation(
                    f"Right-hand side column {component + 1} has mean {value:.3e} under the invariant measure",
                    component + 1, float(value),
                )
        drift, diffusion = self._fast_dynamics.coefficients_on_grid(model, x, grid)
        support = grid.trusted_mask(density.values)
        interior = np.flatnonzero(support)
        bad = interior[~(diffusion[interior] > 0)]
        if bad.size and not model.degenerate_ok:
            raise DegenerateDiffusion(
                f"Nonpositive diffusion {diffusion[bad[0]]:.3e} at y = {grid.nodes[bad[0]]:.6g}",
                float(grid.nodes[bad[0]]), float(diffusion[bad[0]]),
            )
        trusted = grid.trusted_mask(density.values, diffusion)
        return grid, rhs, drift, diffusion, trusted

    def _certify(self, grid: Grid1D, density: InvariantDensity, values: np.ndarray, dy: np.ndarray,
                 d2y: np.ndarray, rhs: np.ndarray, drift: np.ndarray, diffusion: np.ndarray,
                 trusted: np.ndarray, multiplier: float = 0.0) -> CorrectorSolution:
        values = values - density.integrate(values)[None, :]
        first, second = fourth_order_derivatives(values, grid)
        residual = drift[:, None] * first + 0.5 * diffusion[:, None] * second + rhs
        residual_sup = float(np.max(np.abs(residual[trusted]))) if np.any(trusted) else float("inf")
        centering = float(np.max(np.abs(density.integrate(values))))
        solution = CorrectorSolution(
            grid=grid,
            values=values,
            dy_values=dy,
            d2y_values=d2y,
            centering_defect=centering,
            residual_sup=residual_sup,
            residual_tolerance=self._settings.residual_tolerance,
            method=self.method,
            kernel_multiplier=float(multiplier),
            centering_tolerance=self._settings.centering_tolerance,
        )
        if not solution.certified:
            logger.warning(
                f"{self.method} Poisson solve not certified: residual {residual_sup:.3e}, centering {centering:.3e}"
            )
        return solution


class QuadraturePoissonSolver(_PoissonSolverBase):
    """
    u' = -2 (G - K) / (a m) with G(y) = int^y F m, integrated from the nearer
    tail on truncated grids; K enforces periodicity of u on the torus.
    """

    method = "quadrature"

    def solve(self, model: SlowFastModel, x, rhs: np.ndarray, density: InvariantDensity) -> CorrectorSolution:
        x = np.asarray(x, dtype=float)
        grid, rhs, drift, diffusion, trusted = self._prepare(model, x, rhs, density)
        if abs(density.flux) > _ZERO_FLUX:
            raise SingularSystem(
                "The quadrature route needs a reversible fast process; use the finite-difference solver",
                self.method,
            )
        if not np.any(rhs):
            zeros = np.zeros_like(rhs)
            return self._certify(grid, density, zeros, zeros, zeros, rhs, drift, diffusion, trusted)

        m = density.values
        speed = diffusion * m
        valid = (speed > np.finfo(float).tiny * 1e10) & np.isfinite(speed)
        weighted = rhs * m[:, None]
        h = grid.spacing

        if grid.is_periodic:
            closed = np.vstack([weighted, weighted[:1]])
            flux = cumulative_simpson(closed, h, axis=0)[:-1]
            inverse_speed = np.where(valid, 1.0 / np.where(valid, speed, 1.0), 0.0)
            constant = grid.integrate(flux * inverse_speed[:, None]) / grid.integrate(inverse_speed)
            flux = flux - constant[None, :]
        else:
            from_left = cumulative_simpson(weighted, h, axis=0)
            from_right = cumulative_simpson(weighted[::-1], h, axis=0)[::-1]
            mass = cumulative_simpson(m, h)
            split = int(np.searchsorted(mass, 0.5 * mass[-1]))
            flux = np.where((np.arange(grid.size) <= split)[:, None], from_left, -from_right)

        dy = np.zeros_like(rhs)
        dy[valid] = -2.0 * flux[valid] / speed[valid, None]
        if not np.all(valid):
            nearest = np.flatnonzero(valid)
            fill = nearest[np.abs(np.arange(grid.size)[:, None] - nearest[None, :]).argmin(axis=1)]
            dy = dy[fill]

        with np.errstate(divide="ignore", invalid="ignore"):
            d2y = -2.0 * (rhs + drift[:, None] * dy) / diffusion[:, None]
        d2y[~np.isfinite(d2y)] = 0.0

        if grid.is_periodic:
            closed = np.vstack([dy, dy[:1]])
            values = cumulative_simpson(closed, h, axis=0)[:-1]
        else:
            # both integrations start at an end node, where G = 0 turns u' into 0/0
            dy = extrapolate_ends(dy)
            d2y = extrapolate_ends(d2y)
            values = cumulative_simpson(dy, h, axis=0)
        return self._certify(grid, density, values, dy, d2y, rhs, drift, diffusion, trusted)


class FiniteDifferencePoissonSolver(_PoissonSolverBase):
    """
    Lines and tori: central differences of order 2 or 4, reflecting ghost
    nodes at truncation boundaries (they lie in negligible tails), cyclic on
    the torus. Half-lines: cell balances of the flux form with zero flux
    through both ends, so the discrete adjoint kernel is the vector of cell
    masses and no condition is imposed at a degenerate end. Either operator
    is bordered by [w m]^T u = 0 and a Lagrange multiplier column.
    """

    method = "fd"

    def solve(self, model: SlowFastModel, x, rhs: np.ndarray, density: InvariantDensity) -> CorrectorSolution:
        x = np.asarray(x, dtype=float)
        grid, rhs, drift, diffusion, trusted = self._prepare(model, x, rhs, density)
        if not np.any(rhs):
            zeros = np.zeros_like(rhs)
            return self._certify(grid, density, zeros, zeros, zeros, rhs, drift, diffusion, trusted)

        if grid.kind == GridKind.half_line:
            operator, source = self._finite_volume_system(model, x, rhs, density)
            first_op, second_op = one_sided_operators(grid.size, grid.spacing)
        else:
            first_op, second_op = self._difference_operators(grid, self._settings.stencil_order)
            operator = sparse.diags(drift) @ first_op + 0.5 * sparse.diags(diffusion) @ second_op
            source = -rhs

        size = grid.size
        constraint = sparse.csr_matrix((grid.weights * density.values).reshape(1, -1))
        bordered = sparse.bmat([
            [operator, sparse.csr_matrix(np.ones((size, 1)))],
            [constraint, None],
        ], format="csc")
        system_rhs = np.vstack([source, np.zeros((1, rhs.shape[1]))])
        try:
            factor = splu(bordered)
            solution = factor.solve(system_rhs)
        except RuntimeError as exc:
            raise SingularSystem(f"Bordered Poisson system is singular: {exc}", "poisson_fd")
        if not np.all(np.isfinite(solution)):
            raise SingularSystem("Bordered Poisson system produced non-finite values", "poisson_fd")

        values = solution[:size]
        multiplier = float(np.max(np.abs(solution[size])))
        dy = first_op @ values
        d2y = second_op @ values
        return self._certify(grid, density, values, dy, d2y, rhs, drift, diffusion, trusted, multiplier)

    def _finite_volume_system(self, model: SlowFastModel, x: np.ndarray, rhs: np.ndarray,
                              density: InvariantDensity):
        """
        Row k is the balance of the flux 1/2 a m u' over the cell of node k
        (half cells at both ends) divided by the cell mass, so the rows sum
        to zero against the cell masses.
        """
        grid = density.grid
        size, h = grid.size, grid.spacing
        m = density.values

        cells = self._cell_integrals(size, h)
        masses = cells @ m
        if np.any(masses <= 0) or not np.all(np.isfinite(masses)):
            raise SingularSystem("Invariant density is not resolved by the finite-volume cells", "poisson_fd")

        faces = grid.nodes[:-1] + 0.5 * h
        _, face_diffusion = self._fast_dynamics.coefficients_at(model, x, faces)
        face_density = np.maximum(self._face_matrix(size, _FACE_VALUE, _FACE_VALUE_EDGE, mirror_sign=1.0) @ m, 0.0)
        speed = 0.5 * face_diffusion * face_density
        slopes = self._face_matrix(size, _FACE_SLOPE, _FACE_SLOPE_EDGE, mirror_sign=-1.0) / h

        balance = sparse.diags([np.ones(size - 1), -np.ones(size - 1)], [0, -1], shape=(size, size - 1))
        operator = sparse.diags(1.0 / masses) @ balance @ sparse.diags(speed) @ slopes
        source = -(cells @ (rhs * m[:, None])) / masses[:, None]
        return operator.tocsr(), source

    @staticmethod
    def _face_matrix(size: int, interior: np.ndarray, edge: np.ndarray, mirror_sign: float):
        """Rows for the size - 1 faces; the first and last use the one-sided weights"""
        matrix = sparse.lil_matrix((size - 1, size))
        matrix[0, 0:4] = edge
        matrix[size - 2, size - 4:size] = mirror_sign * edge[::-1]
        for face in range(1, size - 2):
            matrix[face, face - 1:face + 3] = interior
        return matrix.tocsr()

    @staticmethod
    def _cell_integrals(size: int, h: float):
        """Fourth-order cell integrals: corrected midpoint rule inside, half cells at the ends"""
        main = np.full(size, 22.0 / 24.0)
        side = np.full(size - 1, 1.0 / 24.0)
        matrix = sparse.diags([side, main, side], [-1, 0, 1], shape=(size, size)).tolil()
        matrix[0, :] = 0.0
        matrix[size - 1, :] = 0.0
        matrix[0, 0:4] = _HALF_CELL
        matrix[size - 1, size - 4:size] = _HALF_CELL[::-1]
        return (h * matrix).tocsr()

    @staticmethod
    def _difference_operators(grid: Grid1D, order: int):
        offsets, first_w, second_w = _STENCILS[order]
        size = grid.size
        h = grid.spacing
        first = sparse.lil_matrix((size, size))
        second = sparse.lil_matrix((size, size))
        for row in range(size):
            for offset, w1, w2 in zip(offsets, first_w, second_w):
                column = row + offset
                if grid.is_periodic:
                    column %= size
                elif column < 0:
                    column = -column
                elif column >= size:
                    column = 2 * (size - 1) - column
                first[row, column] += w1 / h
                second[row, column] += w2 / (h * h)
        return first.tocsr(), second.tocsr()
