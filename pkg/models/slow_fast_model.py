"""
Slow-fast model domain entity.

Coefficient callables take x of shape (..., n) and y of shape (..., d) with
broadcastable leading axes and return (..., n), (..., n, m), (..., d) or
(..., d, m) arrays. On a half-line fast space every coefficient is evaluated
at max(y, 0) (full truncation).
"""

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Optional

import numpy as np

from exceptions.model_exceptions import InvalidModelDefinition
from schemas.model_config import Dimensions, FastSpace, GrowthErgodicityParams, RegimeScaling

CoefficientFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Coefficients:
    """
    b, c: slow drifts; sigma: slow noise; f, g: fast drifts; tau1, tau2: fast noise.
    grad_b, grad_c have shape (..., n, n) and grad_g (..., d, n); None means unknown.
    """
    b: CoefficientFunction
    c: CoefficientFunction
    sigma: CoefficientFunction
    f: CoefficientFunction
    g: CoefficientFunction
    tau1: CoefficientFunction
    tau2: CoefficientFunction
    grad_b: Optional[CoefficientFunction] = None
    grad_c: Optional[CoefficientFunction] = None
    grad_g: Optional[CoefficientFunction] = None
    g_bound: Optional[float] = None


@dataclass(frozen=True, eq=False)
class SlowFastModel:
    name: str
    dimensions: Dimensions
    coefficients: Coefficients
    exponents: GrowthErgodicityParams
    regime: RegimeScaling
    fast_space: FastSpace = field(default_factory=FastSpace)
    x0: np.ndarray = None
    y0: np.ndarray = None
    degenerate_ok: bool = False
    fast_depends_on_x: bool = True
    parameters: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        n, d = self.dimensions.n, self.dimensions.d
        x0 = np.zeros(n) if self.x0 is None else np.asarray(self.x0, dtype=float).reshape(-1)
        y0 = np.zeros(d) if self.y0 is None else np.asarray(self.y0, dtype=float).reshape(-1)
        if x0.shape != (n,) or y0.shape != (d,):
            raise InvalidModelDefinition(
                f"Initial state shapes {x0.shape}, {y0.shape} do not match n={n}, d={d}", "initial"
            )
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "y0", y0)

    # -- regime data ------------------------------------------------------

    @cached_property
    def fingerprint(self) -> str:
        """Digest of everything that determines the dynamics; equal models share cache entries"""
        c = self.coefficients
        parts = [
            self.name, self.regime.model_dump_json(), self.fast_space.model_dump_json(),
            self.dimensions.model_dump_json(), repr(sorted(self.parameters.items())), repr(self.degenerate_ok),
        ] + [repr(getattr(c, name)) for name in (
            "b", "c", "sigma", "f", "g", "tau1", "tau2", "grad_b", "grad_c", "grad_g", "g_bound",
        )]
        return hashlib.sha256("\x1f".join(parts).encode()).hexdigest()

    @property
    def regime_index(self) -> int:
        return self.regime.regime

    @property
    def gamma(self) -> Optional[float]:
        return self.regime.effective_gamma

    @property
    def is_half_line(self) -> bool:
        return self.fast_space.kind == "half_line"

    # -- coefficient evaluation ---------------------------------------------

    def fast_argument(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.maximum(y, 0.0) if self.is_half_line else y

    def evaluate(self, func: CoefficientFunction, x, y) -> np.ndarray:
        return np.asarray(func(np.asarray(x, dtype=float), self.fast_argument(y)), dtype=float)

    def b(self, x, y) -> np.ndarray:
        return self.evaluate(self.coefficients.b, x, y)

    def c(self, x, y) -> np.ndarray:
        return self.evaluate(self.coefficients.c, x, y)

    def sigma(self, x, y) -> np.ndarray:
        return self.evaluate(self.coefficients.sigma, x, y)

    def f(self, x, y) -> np.ndarray:
        return self.evaluate(self.coefficients.f, x, y)

    def g(self, x, y) -> np.ndarray:
        return self.evaluate(self.coefficients.g, x, y)

    def tau1(self, x, y) -> np.ndarray:
        return self.evaluate(self.coefficients.tau1, x, y)

    def tau2(self, x, y) -> np.ndarray:
        return self.evaluate(self.coefficients.tau2, x, y)

    def fast_noise_covariance(self, x, y) -> np.ndarray:
        """tau1 tau1^T + tau2 tau2^T, shape (..., d, d)"""
        t1, t2 = self.tau1(x, y), self.tau2(x, y)
        return t1 @ np.swapaxes(t1, -1, -2) + t2 @ np.swapaxes(t2, -1, -2)

    def effective_fast_drift(self, x, y) -> np.ndarray:
        """Drift of the generator the fast variable is averaged against"""
        if self.regime_index == 1:
            return self.f(x, y)
        return self.gamma * self.f(x, y) + self.g(x, y)

    def effective_fast_diffusion(self, x, y) -> np.ndarray:
        """Second-order coefficient a of the averaging generator, shape (..., d, d)"""
        covariance = self.fast_noise_covariance(x, y)
        if self.regime_index == 1:
            return covariance
        return self.gamma * covariance

    def on_grid(self, x: np.ndarray, nodes: np.ndarray):
        """Broadcast a slow state against 1-D fast nodes: shapes (1, n) and (N, 1)"""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        y = np.asarray(nodes, dtype=float).reshape(-1, 1)
        return x, y
