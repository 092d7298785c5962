import math

import numpy as np
import pytest
from scipy.integrate import quad

from exceptions.numerics_exceptions import GridMismatch
from exceptions.simulation_exceptions import MinimizationFailed
from models.paths import AveragedPath, DeviationPath
from models.rate import RateAlongPath
from repositories.builtin_models import example2_q, example3_q, theta_bar
from schemas.run_config import EventSpec
from services.rate_service import event_indicator

TIMES = np.linspace(0.0, 1.0, 65)


@pytest.fixture
def rates(container):
    return container.get_rate_service()


@pytest.fixture
def flat_path():
    return AveragedPath(TIMES, np.zeros((TIMES.size, 2)), np.zeros((TIMES.size, 2)))


@pytest.fixture
def scalar_path():
    return AveragedPath(TIMES, np.zeros((TIMES.size, 1)), np.zeros((TIMES.size, 1)))


def gramian_cost(rates, along, xbar, target):
    shift = np.asarray(target, dtype=float) - rates.zero_cost_path(along, xbar).values[-1]
    return 0.5 * float(shift @ np.linalg.solve(rates.gramian(along, xbar), shift))


# -- linear-quadratic structure -----------------------------------------------------------

def test_brownian_endpoint_cost(rates, scalar_path):
    along = RateAlongPath.constant(TIMES, 0.0, 0.0, 2.0)
    xi, cost = rates.minimize_action_endpoint(along, scalar_path, [1.0])
    assert cost == pytest.approx(0.25, rel=1e-10)
    np.testing.assert_allclose(xi.values[:, 0], TIMES, atol=1e-12)


def test_minimal_action_equals_the_gramian_form(rates, flat_path):
    A = [[-1.0, 0.5], [0.0, -2.0]]
    q = [[1.0, 0.3], [0.3, 2.0]]
    along = RateAlongPath.constant(TIMES, A, [0.2, -0.1], q)
    target = [0.4, -0.2]
    xi, cost = rates.minimize_action_endpoint(along, flat_path, target)
    np.testing.assert_allclose(xi.values[0], [0.0, 0.0])
    np.testing.assert_allclose(xi.values[-1], target)
    assert cost == pytest.approx(gramian_cost(rates, along, flat_path, target), rel=1e-8)


def test_minimizer_beats_perturbed_paths(rates, flat_path):
    along = RateAlongPath.constant(TIMES, [[-1.0, 0.0], [0.5, -0.5]], [0.0, 0.1], [[1.0, 0.0], [0.0, 0.5]])
    xi, cost = rates.minimize_action_endpoint(along, flat_path, [1.0, 1.0])
    bump = np.sin(np.pi * TIMES)[:, None] * np.array([[0.05, -0.02]])
    perturbed = DeviationPath(TIMES, xi.values + bump)
    assert rates.action_functional(along, flat_path, perturbed) > cost


def test_zero_cost_path_has_zero_action(rates, flat_path):
    along = RateAlongPath.constant(TIMES, [[-1.0, 0.5], [0.0, -2.0]], [0.2, -0.1], np.eye(2))
    xi = rates.zero_cost_path(along, flat_path)
    assert rates.action_functional(along, flat_path, xi) == pytest.approx(0.0, abs=1e-14)
    refined = rates.zero_cost_path(along, flat_path, integrator="rk4")
    np.testing.assert_allclose(refined.values, xi.values, atol=1e-2)


def test_lyapunov_variance_of_a_constant_rate(rates, scalar_path):
    along = RateAlongPath.constant(TIMES, -1.0, 0.0, 2.0)
    variance = rates.lyapunov_variance(along, scalar_path)
    assert variance[0, 0, 0] == 0.0
    # V' = -2 V + 2, V(1) = 1 - exp(-2)
    assert variance[-1, 0, 0] == pytest.approx(1.0 - math.exp(-2.0), rel=2e-2)
    assert rates.gramian(along, scalar_path)[0, 0] == variance[-1, 0, 0]


def test_dominant_endpoint(rates, scalar_path):
    along = RateAlongPath.constant(TIMES, 0.0, 0.0, 2.0)
    endpoint, cost = rates.dominant_endpoint(along, scalar_path, EventSpec.parse("eta1>=1.5", 1))
    np.testing.assert_allclose(endpoint, [1.5])
    assert cost == pytest.approx(1.5 ** 2 / 4.0, rel=1e-10)

    endpoint, cost = rates.dominant_endpoint(along, scalar_path, EventSpec.parse("eta1<=-1", 1))
    np.testing.assert_allclose(endpoint, [-1.0])
    assert cost == pytest.approx(0.25, rel=1e-10)


def test_events_containing_the_zero_cost_endpoint_are_free(rates, scalar_path):
    along = RateAlongPath.constant(TIMES, 0.0, 0.5, 1.0)
    endpoint, cost = rates.dominant_endpoint(along, scalar_path, EventSpec.parse("eta1>=0.2", 1))
    assert cost == 0.0
    np.testing.assert_allclose(endpoint, [0.5], atol=1e-12)
    _, cost = rates.dominant_endpoint(along, scalar_path, EventSpec.parse("eta1>=-inf", 1))
    assert cost == 0.0
    with pytest.raises(MinimizationFailed):
        rates.dominant_endpoint(along, scalar_path, EventSpec.parse("eta1>=inf", 1))


def test_time_grids_must_match(rates):
    along = RateAlongPath.constant(TIMES, 0.0, 0.0, 1.0)
    other = np.linspace(0.0, 1.0, 33)
    xbar = AveragedPath(other, np.zeros((33, 1)), np.zeros((33, 1)))
    with pytest.raises(GridMismatch):
        rates.zero_cost_path(along, xbar)


def test_event_indicator():
    eta = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, -1.0]])
    event = EventSpec.parse("1,1.eta>=1", 2)
    np.testing.assert_array_equal(event_indicator(event, eta), [1.0, 1.0, 1.0])
    event = EventSpec.parse("eta2<=0", 2)
    np.testing.assert_array_equal(event_indicator(event, eta), [0.0, 1.0, 1.0])


# -- ingredients of the builtin models ---------------------------------------------------------

@pytest.fixture
def example2_local(rates, example2):
    return rates.local_ingredients(example2, [1.0])


def test_example2_diffusion_matrix(example2_local):
    assert example2_local.q.matrix[0, 0] == pytest.approx(example2_q(), abs=1e-5)
    assert example2_local.kappa.A[0, 0] == pytest.approx(-theta_bar(), abs=1e-6)
    assert example2_local.chi is not None and example2_local.phi.certified


def test_limit_constants(rates, example1, example2):
    assert rates.limit_constant(example2) == 1.0
    assert rates.limit_constant(example1) == 0.0


def test_example1_rate_ingredients(rates, example1):
    local = rates.local_ingredients(example1, [0.5])
    # q = s^2 + int (Phi')^2 tau^2 dmu; Phi solves L Phi = -A cos(x)(cos y - e^{-1/2})
    assert local.q.matrix[0, 0] > 1.0
    assert local.kappa.A[0, 0] == pytest.approx(-math.exp(-0.5) * math.sin(0.5), abs=1e-10)
    np.testing.assert_allclose(local.kappa.d, [0.0])


def test_optimal_controls_attain_the_rate(rates, example2_local):
    eta, beta = [0.3], [-0.4]
    controls = rates.optimal_controls(example2_local, eta, beta)
    assert controls.relative_gap < 1e-10
    assert 0.5 * controls.expected_cost == pytest.approx(example2_local.local_rate(eta, beta), rel=1e-12)
    assert controls.v1.shape == (example2_local.density.grid.size, 1)


def test_ingredients_are_cached(rates, example2):
    ingredients = rates.build_ingredients(example2)
    assert ingredients.at([1.0]) is ingredients.at(np.array([1.0]))
    np.testing.assert_allclose(ingredients.q([1.0]), ingredients.at([1.0]).q.matrix)


def test_example1_fluctuation_corrector_has_the_centered_closed_form(rates, example1):
    local = rates.local_ingredients(example1, [0.5])
    nodes = local.density.grid.nodes
    amplitude = math.cos(0.5)

    def phi_y(y):
        centered = quad(lambda z: amplitude * (math.cos(z) - math.exp(-0.5)) * math.exp(-0.5 * z * z), -np.inf, y)[0]
        return -2.0 * math.exp(0.5 * y * y) * centered

    for y in (-1.0, 0.0, 1.5):
        k = int(np.argmin(np.abs(nodes - y)))
        assert local.phi.dy_values[k, 0] == pytest.approx(phi_y(nodes[k]), abs=1e-5)


def test_example1_q_is_built_from_the_alpha_fields(rates, example1):
    local = rates.local_ingredients(example1, [0.5])
    # alpha1 = sigma = 1 and alpha2 = Phi_y tau with tau = 1
    np.testing.assert_allclose(local.alpha1[:, 0, 0], 1.0)
    np.testing.assert_allclose(local.alpha2[:, 0, 0], local.phi.dy_values[:, 0])
    expected = 1.0 + float(local.density.integrate(local.phi.dy_values[:, 0] ** 2))
    assert local.q.matrix[0, 0] == pytest.approx(expected, rel=1e-12)


def test_example1_theta_drift(rates, example1):
    local = rates.local_ingredients(example1, [0.5])
    nodes = local.density.grid.nodes
    base = local.kappa.A[0, 0] * 0.2 + 1.0
    theta = rates.theta_drift(example1, local, [0.2], nodes, [1.0], [0.0])
    assert theta.shape == (nodes.size, 1)
    np.testing.assert_allclose(theta[:, 0], base, atol=1e-12)
    tilted = rates.theta_drift(example1, local, [0.2], nodes, [1.0], [0.5])
    np.testing.assert_allclose(tilted[:, 0] - base, 0.5 * local.phi.dy_values[:, 0], atol=1e-12)


def test_feasible_perturbations_raise_the_control_cost(rates, example2_local):
    local = example2_local
    controls = rates.optimal_controls(local, [0.3], [-0.4])
    density = local.density
    nodes = density.grid.nodes
    fields = np.concatenate([local.alpha1, local.alpha2], axis=2)
    optimal = np.concatenate([controls.v1, controls.v2], axis=1)

    def constraint(controls_on_grid):
        return np.atleast_1d(density.integrate(np.einsum("kim,km->ki", fields, controls_on_grid)))

    target = constraint(optimal)
    np.testing.assert_allclose(target, np.array([-0.4]) - local.kappa([0.3]), rtol=1e-8)
    rng = np.random.default_rng(2024)
    for _ in range(5):
        weights = rng.normal(size=(3, optimal.shape[1]))
        basis = np.stack([np.ones_like(nodes), np.cos(2.0 * np.pi * nodes), np.sin(2.0 * np.pi * nodes)], axis=1)
        raw = basis @ weights
        # remove the part that would move int (alpha1 v1 + alpha2 v2) dmu
        perturbation = raw - np.einsum("kim,i->km", fields, local.q.solve(constraint(raw)))
        np.testing.assert_allclose(constraint(optimal + perturbation), target, rtol=1e-8, atol=1e-12)
        cost = float(density.integrate(np.sum((optimal + perturbation) ** 2, axis=1)))
        assert cost > controls.cost


@pytest.mark.parametrize("regime", [1, 2])
def test_example3_rate_ingredients_are_certified(rates, models, regime):
    local = rates.local_ingredients(models.get("example3", regime), [0.5])
    assert local.phi.certified
    expected = 1.0 if regime == 1 else example3_q(0.5, 2)
    assert local.q.matrix[0, 0] == pytest.approx(expected, abs=1e-4)


def test_example3_regimes_differ_by_the_corrector_term(rates, models):
    first = rates.local_ingredients(models.get("example3", 1), [0.5])
    second = rates.local_ingredients(models.get("example3", 2), [0.5])
    # b = 0, so chi vanishes and Regime 1 keeps only int sigma^2 dmu = s^2
    assert first.q.matrix[0, 0] == pytest.approx(1.0, abs=1e-9)
    nodes = second.density.grid.nodes
    slope = second.phi.dy_values[:, 0]
    corrector = 2.0 * np.sqrt(nodes) * slope + nodes * slope ** 2
    assert second.q.matrix[0, 0] - first.q.matrix[0, 0] == pytest.approx(
        float(second.density.integrate(corrector)), abs=1e-9
    )
    assert second.q.matrix[0, 0] == pytest.approx(1.50364, abs=1e-4)
