"""
Uniform one-dimensional grids for the fast variable.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from core.validation import ValidationLimits
from exceptions.numerics_exceptions import GridTooCoarse, GridMismatch
from utils.quadrature import gregory_weights


class GridKind(str, Enum):
    line = "line"
    torus = "torus"
    half_line = "half_line"


@dataclass(frozen=True, eq=False)
class Grid1D:
    """
    Uniform nodes on a truncated line, a truncated half-line or a torus.
    Torus nodes exclude the right endpoint (it coincides with the left one).
    """
    kind: GridKind
    nodes: np.ndarray
    spacing: float
    period: Optional[float] = None
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nodes.ndim != 1 or self.nodes.size < ValidationLimits.MIN_GRID_NODES:
            raise GridTooCoarse(
                f"A grid needs at least {ValidationLimits.MIN_GRID_NODES} nodes, got {self.nodes.size}",
                int(self.nodes.size),
            )
        steps = np.diff(self.nodes)
        if np.any(steps <= 0) or np.max(np.abs(steps - self.spacing)) > ValidationLimits.UNIFORMITY_TOLERANCE * max(1.0, abs(self.nodes).max()):
            raise GridMismatch("Grid nodes must be strictly increasing and uniform")
        if self.kind == GridKind.torus:
            weights = np.full(self.nodes.size, self.spacing)
        else:
            weights = gregory_weights(self.nodes.size, self.spacing)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def line(cls, half_width: float, count: int) -> "Grid1D":
        nodes = np.linspace(-half_width, half_width, count)
        return cls(GridKind.line, nodes, 2.0 * half_width / (count - 1))

    @classmethod
    def half_line(cls, lower: float, upper: float, count: int) -> "Grid1D":
        nodes = np.linspace(lower, upper, count)
        return cls(GridKind.half_line, nodes, (upper - lower) / (count - 1))

    @classmethod
    def torus(cls, period: float, count: int) -> "Grid1D":
        spacing = period / count
        return cls(GridKind.torus, spacing * np.arange(count), spacing, period)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def is_periodic(self) -> bool:
        return self.kind == GridKind.torus

    @property
    def lower(self) -> float:
        return float(self.nodes[0])

    @property
    def upper(self) -> float:
        """Right end of the domain (the period end on a torus)"""
        if self.is_periodic:
            return float(self.nodes[0] + self.period)
        return float(self.nodes[-1])

    @property
    def edges(self) -> np.ndarray:
        """Cell edges; on a torus the closing edge at one period is included"""
        if self.is_periodic:
            return np.append(self.nodes, self.upper)
        return self.nodes

    def integrate(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Quadrature along one axis with the grid's weights"""
        values = np.asarray(values, dtype=float)
        if values.shape[axis] != self.size:
            raise GridMismatch(
                f"Expected {self.size} values along axis {axis}, got {values.shape[axis]}",
                self.size, values.shape[axis],
            )
        return np.tensordot(np.moveaxis(values, axis, -1), self.weights, axes=([-1], [0]))

    def trusted_mask(self, density: Optional[np.ndarray] = None,
                     diffusion: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Nodes used for residual norms: away from truncation boundaries and,
        when a density is given, where it is not negligible. With a diffusion,
        the boundary layer where it degenerates is dropped as well.
        """
        mask = np.ones(self.size, dtype=bool)
        if not self.is_periodic:
            cells = ValidationLimits.TRUSTED_BOUNDARY_CELLS
            mask[:cells] = False
            mask[-cells:] = False
        if density is not None:
            mask &= density >= ValidationLimits.TRUSTED_DENSITY_FRACTION * np.max(density)
        if diffusion is not None:
            scale = float(np.max(np.abs(diffusion)))
            mask &= diffusion >= ValidationLimits.DEGENERATE_DIFFUSION_FRACTION * scale
        return mask

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Map points into the fundamental domain (identity off the torus)"""
        if self.is_periodic:
            return self.lower + np.mod(points - self.lower, self.period)
        return points

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Linear interpolation of gridded values (first axis) at arbitrary points"""
        values = np.asarray(values, dtype=float)
        points = np.asarray(points, dtype=float)
        nodes = self.nodes
        if self.is_periodic:
            points = self.wrap(points)
            nodes = self.edges
            values = np.concatenate([values, values[:1]], axis=0)
        flat = values.reshape(values.shape[0], -1)
        columns = [np.interp(points, nodes, flat[:, k]) for k in range(flat.shape[1])]
        result = np.stack(columns, axis=-1)
        return result.reshape(points.shape + values.shape[1:])

    def matches(self, other: "Grid1D") -> bool:
        return (
            self.kind == other.kind
            and self.size == other.size
            and np.array_equal(self.nodes, other.nodes)
        )
