"""
Gridded solutions of Poisson equations in the fast variable (cell problem
chi and fluctuation corrector Phi).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.grid import Grid1D


@dataclass(frozen=True, eq=False)
class CorrectorSolution:
    """
    values, dy_values and d2y_values have shape (N, k): one column per
    right-hand side. Certificates are maxima over columns.
    """
    grid: Grid1D
    values: np.ndarray
    dy_values: np.ndarray
    d2y_values: Optional[np.ndarray]
    centering_defect: float
    residual_sup: float
    residual_tolerance: float
    method: str
    kernel_multiplier: float = 0.0
    centering_tolerance: float = 1e-9

    @property
    def columns(self) -> int:
        return int(self.values.shape[1])

    @property
    def certified(self) -> bool:
        return bool(
            np.isfinite(self.residual_sup)
            and self.residual_sup < self.residual_tolerance
            and self.centering_defect < self.centering_tolerance
        )

    def derivative_at(self, points: np.ndarray) -> np.ndarray:
        """Linearly interpolated y-derivative, shape points.shape + (k,)"""
        return self.grid.interpolate(self.dy_values, points)

    def second_derivative_at(self, points: np.ndarray) -> np.ndarray:
        return self.grid.interpolate(self.d2y_values, points)

    def value_at(self, points: np.ndarray) -> np.ndarray:
        return self.grid.interpolate(self.values, points)
