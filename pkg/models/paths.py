"""
Trajectories on [0, 1]: the averaged ODE solution, deviation paths and
batches of simulated paths.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from exceptions.numerics_exceptions import GridMismatch


@dataclass(frozen=True, eq=False)
class AveragedDrift:
    """x -> lambda_bar(x) and its Jacobian, with the method used for the latter"""
    evaluate: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    method: str
    dimension: int

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class AveragedPath:
    """X_bar on a uniform time grid; drift holds lambda_bar(X_bar) at the nodes"""
    times: np.ndarray
    values: np.ndarray
    drift: np.ndarray
    integrator: str = "rk4"
    error_estimate: float = 0.0
    _spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.times, self.values, self.drift, axis=0))

    @property
    def steps(self) -> int:
        return int(self.times.size - 1)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def __call__(self, t) -> np.ndarray:
        """Hermite interpolation, consistent with the ODE slope at the nodes"""
        return self._spline(np.clip(t, self.times[0], self.times[-1]))

    def same_grid(self, times: np.ndarray) -> bool:
        return times.shape == self.times.shape and np.allclose(times, self.times, rtol=0, atol=1e-12)


@dataclass(frozen=True, eq=False)
class DeviationPath:
    """Deviation xi_t on the same time grid as an averaged path; xi_0 = 0"""
    times: np.ndarray
    values: np.ndarray

    def velocities(self) -> np.ndarray:
        """Forward differences on each interval, shape (N, n)"""
        return np.diff(self.values, axis=0) / np.diff(self.times)[:, None]

    def check_grid(self, xbar: AveragedPath):
        if not xbar.same_grid(self.times):
            raise GridMismatch("Deviation path and averaged path use different time grids",
                               xbar.times.size, self.times.size)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """
    Simulated paths. Arrays are (paths, records, dim); `log_weights` and
    `control_energy` are per path, `y_power_integral` holds the running
    integral of |Y|^power when requested.
    """
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    log_weights: np.ndarray
    control_energy: np.ndarray
    dt: float
    epsilon: float
    delta: float
    h: float
    y_power_integral: Optional[np.ndarray] = None

    @property
    def path_count(self) -> int:
        return int(self.x.shape[0])

    @property
    def final_eta(self) -> np.ndarray:
        return self.eta[:, -1, :]

    @property
    def final_x(self) -> np.ndarray:
        return self.x[:, -1, :]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)
