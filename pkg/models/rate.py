"""
Moderate-deviation rate ingredients: the affine drift kappa(x, eta), the
diffusion matrix q(x) with its Cholesky factor, the alpha fields and the
optimal controls built from them.
"""

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from exceptions.numerics_exceptions import GridMismatch, SingularQ
from models.corrector import CorrectorSolution
from models.invariant_density import InvariantDensity
from models.paths import AveragedPath


@dataclass(frozen=True, eq=False)
class KappaMap:
    """kappa(x, eta) = A eta + d at one slow state"""
    A: np.ndarray
    d: np.ndarray

    def __call__(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return eta @ self.A.T + self.d


@dataclass(frozen=True, eq=False)
class QMatrix:
    """Symmetric positive-definite q(x) and its Cholesky factorization"""
    matrix: np.ndarray
    floor: float = 1e-12
    factor: Tuple[np.ndarray, bool] = field(init=False, repr=False)
    min_eigenvalue: float = field(init=False)

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if not np.all(np.isfinite(matrix)):
            raise SingularQ("q(x) has non-finite entries")
        matrix = 0.5 * (matrix + matrix.T)
        smallest = float(np.linalg.eigvalsh(matrix)[0])
        if smallest <= self.floor:
            raise SingularQ(f"q(x) is not positive definite (smallest eigenvalue {smallest:.3e})", smallest)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "factor", cho_factor(matrix, lower=True))
        object.__setattr__(self, "min_eigenvalue", smallest)

    def solve(self, rhs) -> np.ndarray:
        """q^{-1} rhs; rhs may carry trailing columns"""
        return cho_solve(self.factor, np.asarray(rhs, dtype=float))

    def quadratic(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ self.solve(v))

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.matrix.shape[0]))


@dataclass(frozen=True)
class LocalRateQuery:
    """Point (x, eta, beta) at which the local rate is evaluated"""
    x: Tuple[float, ...]
    eta: Tuple[float, ...]
    beta: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class LocalIngredients:
    """
    Everything the rate needs at one slow state x. alpha1 and alpha2 are
    gridded with shape (N, n, m) on the density's grid; `corrector` is chi in
    Regime 1 and Phi in Regime 2, `phi` is always the fluctuation corrector.
    """
    x: np.ndarray
    density: InvariantDensity
    lambda_bar: np.ndarray
    kappa: KappaMap
    q: QMatrix
    alpha1: np.ndarray
    alpha2: np.ndarray
    phi: CorrectorSolution
    chi: Optional[CorrectorSolution] = None

    def local_rate(self, eta, beta) -> float:
        """1/2 (beta - kappa)^T q^{-1} (beta - kappa)"""
        residual = np.asarray(beta, dtype=float) - self.kappa(eta)
        return 0.5 * self.q.quadratic(residual)


@dataclass(frozen=True, eq=False)
class RateAlongPath:
    """A(X_bar_t), d(X_bar_t) and q(X_bar_t) sampled at the nodes of a time grid"""
    times: np.ndarray
    A: np.ndarray
    d: np.ndarray
    q: np.ndarray

    @classmethod
    def constant(cls, times: np.ndarray, A, d, q) -> "RateAlongPath":
        count = times.size
        A, d, q = np.atleast_2d(A), np.atleast_1d(d), np.atleast_2d(q)
        return cls(
            times,
            np.broadcast_to(A, (count,) + A.shape).copy(),
            np.broadcast_to(d, (count,) + d.shape).copy(),
            np.broadcast_to(q, (count,) + q.shape).copy(),
        )

    @property
    def dimension(self) -> int:
        return int(self.d.shape[1])

    @property
    def steps(self) -> int:
        return int(self.times.size - 1)

    def check_grid(self, times: np.ndarray):
        if times.shape != self.times.shape or not np.allclose(times, self.times, rtol=0, atol=1e-12):
            raise GridMismatch("Rate samples and path use different time grids", self.times.size, times.size)


class RateIngredients:
    """
    Lazily built, cached map x -> LocalIngredients. The builder performs the
    density, corrector and quadrature work for one x; results are memoized
    under a lock so concurrent readers share a single computation.
    """

    def __init__(self, builder: Callable[[np.ndarray], LocalIngredients], dimension: int):
        self._builder = builder
        self._cache: Dict[Tuple[float, ...], LocalIngredients] = {}
        self._lock = threading.Lock()
        self.dimension = dimension

    def at(self, x) -> LocalIngredients:
        x = np.asarray(x, dtype=float).reshape(self.dimension)
        key = tuple(float(v) for v in x)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        local = self._builder(x)
        with self._lock:
            return self._cache.setdefault(key, local)

    def kappa(self, x, eta) -> np.ndarray:
        return self.at(x).kappa(eta)

    def q(self, x) -> np.ndarray:
        return self.at(x).q.matrix

    def local_rate(self, query: LocalRateQuery) -> float:
        return self.at(query.x).local_rate(query.eta, query.beta)

    def along(self, xbar: AveragedPath) -> RateAlongPath:
        locals_: List[LocalIngredients] = [self.at(value) for value in xbar.values]
        return RateAlongPath(
            xbar.times,
            np.stack([local.kappa.A for local in locals_]),
            np.stack([local.kappa.d for local in locals_]),
            np.stack([local.q.matrix for local in locals_]),
        )

    def nodes(self, xbar: AveragedPath) -> List[LocalIngredients]:
        return [self.at(value) for value in xbar.values]


@dataclass(frozen=True, eq=False)
class OptimalControls:
    """
    Gridded minimizing controls v1(y), v2(y), each of shape (N, m), with the
    attained cost int |v1|^2 + |v2|^2 dmu and the closed-form value it must equal.
    """
    v1: np.ndarray
    v2: np.ndarray
    cost: float
    expected_cost: float

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.expected_cost), np.finfo(float).tiny)
        return abs(self.cost - self.expected_cost) / scale
