"""
Gridded invariant density of the fast process for a frozen slow state.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from exceptions.numerics_exceptions import GridMismatch
from models.grid import Grid1D


@dataclass(frozen=True, eq=False)
class InvariantDensity:
    """
    Density values on a grid (or a tensor product of grids for separable
    models). `log_normalizer` is the log of the integral of the unnormalized
    speed-measure density; `mass_defect` estimates the mass outside the
    truncation; `flux` is the stationary probability current (zero unless the
    fast drift is non-gradient on a torus).
    """
    grids: Tuple[Grid1D, ...]
    values: np.ndarray
    log_normalizer: float
    mass_defect: float
    flux: float = 0.0

    @property
    def grid(self) -> Grid1D:
        if len(self.grids) != 1:
            raise GridMismatch("Product densities have no single grid", 1, len(self.grids))
        return self.grids[0]

    @property
    def dimension(self) -> int:
        return len(self.grids)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(grid.size for grid in self.grids)

    def integrate(self, integrand: np.ndarray) -> np.ndarray:
        """
        Integral of integrand * density. The leading axes of the integrand must
        match the grid(s); trailing axes are kept (vector or matrix integrands).
        """
        integrand = np.asarray(integrand, dtype=float)
        if integrand.shape[:self.dimension] != self.shape:
            raise GridMismatch(
                f"Integrand leading shape {integrand.shape[:self.dimension]} does not match grid {self.shape}",
                self.shape, integrand.shape[:self.dimension],
            )
        trailing = integrand.ndim - self.dimension
        weighted = integrand * self.values.reshape(self.shape + (1,) * trailing)
        for grid in self.grids:
            weighted = grid.integrate(weighted, axis=0)
        return weighted

    def total_mass(self) -> float:
        return float(self.integrate(np.ones(self.shape)))

    def mesh(self) -> np.ndarray:
        """Tensor-grid points of shape (*shape, d)"""
        axes = np.meshgrid(*[grid.nodes for grid in self.grids], indexing="ij")
        return np.stack(axes, axis=-1)
