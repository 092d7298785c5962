"""
Builtin models and their closed-form oracles.

Each builtin is stored as a model-file document, so builtins and user files
go through the same schema and the same compiler; parameter overrides are
just edits of the [parameters] table.

example1  Regime 2, b = A cos(x1) cos(y1), Ornstein-Uhlenbeck fast motion
          driven by B, sigma constant.
example2  Regime 1 first-order Langevin dynamics on the unit torus with
          Q(y) = A cos(2 pi y) and V(x) = k x^2 / 2.
example3  CIR fast motion a (b - y) dt + tau sqrt(y) dW on the half-line,
          c = y / (1 + y) - x, offered in both regimes.
"""

import copy
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy import integrate, special, stats


@dataclass(frozen=True)
class BuiltinModel:
    """A named model document with the regimes it can be built in"""
    name: str
    description: str
    document: Dict[str, Any]
    regimes: Dict[int, Dict[str, Any]]
    default_regime: int
    parameter_notes: Dict[str, str] = field(default_factory=dict)

    def definition(self, regime: Optional[int] = None) -> Dict[str, Any]:
        """Deep copy of the document with the [regime] table filled in"""
        chosen = self.default_regime if regime is None else regime
        if chosen not in self.regimes:
            raise KeyError(chosen)
        document = copy.deepcopy(self.document)
        document["regime"] = copy.deepcopy(self.regimes[chosen])
        return document


EXAMPLE1 = BuiltinModel(
    name="example1",
    description="Regime 2 averaging of b = A cos(x) cos(y) against an Ornstein-Uhlenbeck fast motion",
    document={
        "name": "example1",
        "dimensions": {"n": 1, "d": 1, "m": 1},
        "coefficients": {
            "b": "A * cos(x1) * cos(y1)",
            "c": 0,
            "sigma": "s",
            "f": "-y1 / 2",
            "g": 0,
            "tau1": 0,
            "tau2": "tau",
            "grad_b": "-A * sin(x1) * cos(y1)",
            "grad_c": 0,
            "g_bound": 0.0,
        },
        "exponents": {"q_b": 0.0, "q_c": 0.0, "q_sigma": 0.0, "r": 1.0,
                      "recurrence_gamma": 0.4, "recurrence_radius": 1.0, "beta1": 1.0, "beta2": 1.0},
        "fast_space": {"kind": "line"},
        "parameters": {"A": 1.0, "s": 1.0, "tau": 1.0},
        "initial": {"x0": [0.5], "y0": [0.0]},
    },
    regimes={2: {"regime": 2, "scaling_family": {"c_delta": 1.0, "p": 1.0, "q_h": 0.25}}},
    default_regime=2,
    parameter_notes={"A": "amplitude of b", "s": "slow noise sigma", "tau": "fast noise tau2"},
)

EXAMPLE2 = BuiltinModel(
    name="example2",
    description="First-order Langevin dynamics in a rapidly oscillating potential on the unit torus",
    document={
        "name": "example2",
        "dimensions": {"n": 1, "d": 1, "m": 1},
        "coefficients": {
            "b": "2 * pi * A * sin(2 * pi * y1)",
            "c": "-k * x1",
            "sigma": "sqrt(2 * D)",
            "f": "2 * pi * A * sin(2 * pi * y1)",
            "g": "-k * x1",
            "tau1": "sqrt(2 * D)",
            "tau2": 0,
            "grad_b": 0,
            "grad_c": "-k",
        },
        "exponents": {"q_b": 0.0, "q_c": 0.0, "q_sigma": 0.0, "r": 1.0,
                      "recurrence_gamma": 0.4, "recurrence_radius": 1.0, "beta1": 2.0, "beta2": 2.0},
        "fast_space": {"kind": "torus", "period": 1.0},
        "parameters": {"A": 1.0, "D": 1.0, "k": 1.0},
        "initial": {"x0": [1.0], "y0": [0.0]},
    },
    regimes={1: {"regime": 1, "scaling_family": {"c_delta": 1.0, "p": 1.25, "q_h": 0.25}}},
    default_regime=1,
    parameter_notes={"A": "amplitude of Q = A cos(2 pi y)", "D": "temperature", "k": "stiffness of V = k x^2 / 2"},
)

EXAMPLE3 = BuiltinModel(
    name="example3",
    description="Square-root (CIR) fast motion on the half-line; the rate differs between the regimes",
    document={
        "name": "example3",
        "dimensions": {"n": 1, "d": 1, "m": 1},
        "coefficients": {
            "b": 0,
            "c": "y1 / (1 + y1) - x1",
            "sigma": "s",
            "f": "a * (b - y1)",
            "g": 0,
            "tau1": "tau * sqrt(y1)",
            "tau2": 0,
            "grad_b": 0,
            "grad_c": -1,
            "g_bound": 0.0,
        },
        "exponents": {"q_b": 0.0, "q_c": 0.0, "q_sigma": 0.0, "r": 1.0,
                      "recurrence_gamma": 0.5, "recurrence_radius": 2.0, "beta1": 1.0, "beta2": 1.0},
        "fast_space": {"kind": "half_line"},
        "parameters": {"a": 1.0, "b": 1.0, "tau": 1.0, "s": 1.0},
        "initial": {"x0": [0.5], "y0": [1.0]},
        "degenerate_ok": True,
    },
    regimes={
        1: {"regime": 1, "scaling_family": {"c_delta": 1.0, "p": 1.25, "q_h": 0.25}},
        2: {"regime": 2, "scaling_family": {"c_delta": 1.0, "p": 1.0, "q_h": 0.25}},
    },
    default_regime=1,
    parameter_notes={"a": "mean reversion", "b": "long-run mean", "tau": "volatility", "s": "slow noise sigma"},
)

BUILTIN_MODELS: Dict[str, BuiltinModel] = {model.name: model for model in (EXAMPLE1, EXAMPLE2, EXAMPLE3)}


# -- example1 oracles -----------------------------------------------------------

def example1_lambda_bar(x, amplitude: float = 1.0, tau: float = 1.0) -> np.ndarray:
    """A exp(-tau^2 / 2) cos(x): the fast motion is N(0, tau^2) distributed"""
    return amplitude * math.exp(-0.5 * tau * tau) * np.cos(np.asarray(x, dtype=float))


# -- example2 oracles -----------------------------------------------------------

def gibbs_partition(amplitude: float = 1.0, temperature: float = 1.0):
    """Z = int_0^1 exp(-Q/D) and Z_hat = int_0^1 exp(Q/D) for Q = A cos(2 pi y); both equal I0(A/D)"""
    value = float(special.i0(amplitude / temperature))
    return value, value


def theta_bar(amplitude: float = 1.0, temperature: float = 1.0) -> float:
    z, z_hat = gibbs_partition(amplitude, temperature)
    return 1.0 / (z * z_hat)


def theta(y, amplitude: float = 1.0, temperature: float = 1.0) -> np.ndarray:
    """
    Theta(y) with grad_y Phi = Theta(y) V'(x) / D, evaluated by adaptive
    quadrature of its integral representation on [0, 1).
    """
    z, z_hat = gibbs_partition(amplitude, temperature)

    def potential(point: float) -> float:
        return amplitude * math.cos(2.0 * math.pi * point) / temperature

    def inner(rho: float) -> float:
        mass, _ = integrate.quad(lambda s: math.exp(-potential(s)) / z - 1.0, 0.0, rho)
        return math.exp(potential(rho)) * mass

    shift, _ = integrate.quad(inner, 0.0, 1.0, limit=200)
    shift /= z_hat

    def single(point: float) -> float:
        point = point % 1.0
        mass, _ = integrate.quad(lambda s: math.exp(-potential(s)), 0.0, point)
        return math.exp(potential(point)) / z_hat * (point - mass / z + shift)

    points = np.asarray(y, dtype=float)
    return np.vectorize(single, otypes=[float])(points)


def example2_q(amplitude: float = 1.0, temperature: float = 1.0) -> float:
    """q = 2 D Theta_bar"""
    return 2.0 * temperature * theta_bar(amplitude, temperature)


def example2_kappa_constant(x: float, j1: float = 1.0, amplitude: float = 1.0,
                            temperature: float = 1.0, stiffness: float = 1.0) -> float:
    """d(x) = -j1 int (1/D) Theta(y) V'(x)^2 mu(dy) with V = k x^2 / 2"""
    z, _ = gibbs_partition(amplitude, temperature)
    nodes = np.linspace(0.0, 1.0, 257)
    weights = np.exp(-amplitude * np.cos(2.0 * np.pi * nodes) / temperature) / z
    values = theta(nodes, amplitude, temperature) * weights
    mean = float(integrate.simpson(values, x=nodes))
    slope = stiffness * x
    return -j1 * mean * slope * slope / temperature


# -- example3 oracles -----------------------------------------------------------------

def example3_density(y, a: float = 1.0, b: float = 1.0, tau: float = 1.0) -> np.ndarray:
    """Gamma density with shape 2ab/tau^2 and rate 2a/tau^2"""
    shape = 2.0 * a * b / (tau * tau)
    rate = 2.0 * a / (tau * tau)
    return stats.gamma.pdf(np.asarray(y, dtype=float), shape, scale=1.0 / rate)


def example3_q(x: float, regime: int, a: float = 1.0, b: float = 1.0, tau: float = 1.0,
               s: float = 1.0, gamma: float = 1.0, nodes: int = 4097, upper: float = 40.0) -> float:
    """
    Regime 1: q = s^2. Regime 2: q = int (s + tau sqrt(y) Phi')^2 m with
    Phi' = -2 G / (gamma tau^2 y m) and G(y) = int_0^y (c - lambda_bar) m.
    """
    if regime == 1:
        return s * s
    y = np.linspace(0.0, upper, nodes)
    m = example3_density(y, a, b, tau)
    c = y / (1.0 + y) - x
    lambda_bar = float(integrate.simpson(c * m, x=y))
    centered = (c - lambda_bar) * m
    from_left = integrate.cumulative_simpson(centered, x=y, initial=0.0)
    from_right = -integrate.cumulative_simpson(centered[::-1], x=upper - y[::-1], initial=0.0)[::-1]
    # integrate from the nearer tail
    median = float(y[np.searchsorted(integrate.cumulative_simpson(m, x=y, initial=0.0), 0.5)])
    flux = np.where(y <= median, from_left, from_right)
    slope = np.zeros_like(y)
    inner = (y > 0) & (m > 1e-300)
    slope[inner] = -2.0 * flux[inner] / (gamma * tau * tau * y[inner] * m[inner])
    integrand = (s + tau * np.sqrt(y) * slope) ** 2 * m
    return float(integrate.simpson(integrand, x=y))
