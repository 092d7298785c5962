import math

import numpy as np
import pytest

from exceptions.numerics_exceptions import BlowUp, GridTooCoarse, MissingCellSolution, NonLipschitzDrift
from models.paths import AveragedDrift
from repositories.builtin_models import BUILTIN_MODELS, example1_lambda_bar, theta_bar
from repositories.model_repository import compile_model
from services.averaging_service import AveragingService


@pytest.fixture
def averaging(container):
    return container.get_averaging_service()


def gudermannian_flow(x0, rate, t):
    """Solution of x' = rate cos(x)"""
    return 2.0 * math.atan(math.tanh(0.5 * (rate * t + math.atanh(math.sin(x0)))))


@pytest.mark.parametrize("x", [0.0, 0.5, 2.0])
def test_example1_lambda_bar(averaging, example1, x):
    assert averaging.lambda_bar(example1, [x])[0] == pytest.approx(float(example1_lambda_bar(x)), abs=1e-10)


def test_example1_lambda_bar_follows_the_parameters(averaging, models):
    model = models.get("example1", overrides={"A": 2.0, "tau": 0.5})
    expected = float(example1_lambda_bar(0.5, amplitude=2.0, tau=0.5))
    assert averaging.lambda_bar(model, [0.5])[0] == pytest.approx(expected, abs=1e-10)


def test_analytic_and_difference_jacobians_agree(averaging, example1):
    analytic = averaging.averaged_drift(example1)
    differenced = averaging.averaged_drift(example1, analytic=False)
    assert analytic.method == "analytic"
    assert differenced.method == "quadrature+fd"
    expected = -math.exp(-0.5) * math.sin(0.5)
    assert averaging.grad_lambda_bar(analytic, [0.5])[0, 0] == pytest.approx(expected, abs=1e-10)
    assert averaging.grad_lambda_bar(differenced, [0.5])[0, 0] == pytest.approx(expected, abs=1e-7)


def test_example2_homogenized_drift(averaging, example2):
    local = averaging.local_average(example2, [1.0])
    assert local.chi is not None
    assert local.lambda_bar[0] == pytest.approx(-theta_bar(), abs=1e-6)
    jacobian = averaging.grad_lambda_bar(averaging.averaged_drift(example2), [1.0])
    assert jacobian[0, 0] == pytest.approx(-theta_bar(), abs=1e-6)


def test_regime1_lambda_needs_the_cell_solution(averaging, example2):
    with pytest.raises(MissingCellSolution):
        averaging.lambda_pointwise(example2, [1.0], np.linspace(0.0, 0.9, 10))


def test_densities_are_cached_when_the_fast_motion_ignores_x(averaging, example1):
    first = averaging.density_at(example1, [0.0])
    assert averaging.density_at(example1, [1.0]) is first
    averaging.clear_cache()
    assert averaging.density_at(example1, [0.0]) is not first


def test_equal_models_share_cache_entries(averaging, models, example1):
    twin = models.get("example1")
    assert twin is not example1
    assert twin.fingerprint == example1.fingerprint
    assert averaging.density_at(twin, [0.0]) is averaging.density_at(example1, [0.0])
    changed = models.get("example1", overrides={"tau": 0.5})
    assert changed.fingerprint != example1.fingerprint
    assert averaging.density_at(changed, [0.0]) is not averaging.density_at(example1, [0.0])


def x_dependent_model():
    document = BUILTIN_MODELS["example1"].definition()
    document["coefficients"]["f"] = "-(1 + x1 ^ 2) * y1 / 2"
    return compile_model(document)


def test_density_cache_is_bounded(container, settings):
    tight = settings.numerics.model_copy(update={"density_cache_size": 3})
    averaging = AveragingService(tight, container.get_fast_dynamics_service(), container.get_poisson_service())
    model = x_dependent_model()
    assert model.fast_depends_on_x
    for x in np.linspace(0.0, 1.0, 6):
        averaging.density_at(model, [x])
    assert len(averaging._densities) == 3
    assert (model.fingerprint, (1.0,)) in averaging._densities
    assert (model.fingerprint, (0.0,)) not in averaging._densities


def test_lambda_bar_is_interpolated_on_the_density_lattice(container, settings):
    lattice = settings.numerics.model_copy(update={"density_lattice": 0.25})
    averaging = AveragingService(lattice, container.get_fast_dynamics_service(), container.get_poisson_service())
    exact = container.get_averaging_service()
    model = x_dependent_model()
    low, high = exact.lambda_bar(model, [0.25]), exact.lambda_bar(model, [0.5])
    np.testing.assert_allclose(averaging.lambda_bar(model, [0.25]), low, rtol=1e-12)
    np.testing.assert_allclose(averaging.lambda_bar(model, [0.4]), 0.4 * low + 0.6 * high, rtol=1e-12)
    # only the two corners were solved
    assert len(averaging._densities) == 2


def test_averaged_path_matches_the_closed_form(averaging, example1):
    path = averaging.solve_xbar(averaging.averaged_drift(example1), example1.x0, nodes=65)
    rate = math.exp(-0.5)
    expected = np.array([gudermannian_flow(0.5, rate, t) for t in path.times])
    np.testing.assert_allclose(path.values[:, 0], expected, atol=1e-7)
    np.testing.assert_allclose(path.drift[:, 0], rate * np.cos(expected), atol=1e-7)
    assert path.integrator == "rk4"
    assert path.error_estimate <= 1e-8
    assert path(0.5)[0] == pytest.approx(gudermannian_flow(0.5, rate, 0.5), abs=1e-7)


def test_averaged_path_needs_enough_nodes(averaging, example1):
    with pytest.raises(GridTooCoarse):
        averaging.solve_xbar(averaging.averaged_drift(example1), example1.x0, nodes=10)


def test_averaged_path_blow_up(averaging):
    document = BUILTIN_MODELS["example1"].definition()
    document["coefficients"].update({"b": 0, "grad_b": 0, "c": "x1 ^ 2", "grad_c": "2 * x1"})
    document["initial"]["x0"] = [2.0]
    model = compile_model(document)
    with pytest.raises(BlowUp):
        averaging.solve_xbar(averaging.averaged_drift(model), model.x0, nodes=65)


def test_average_against_the_gaussian(averaging, example1):
    density = averaging.density_at(example1, [0.5])
    nodes = density.grid.nodes
    assert float(averaging.average_against_mu(np.cos(nodes), density)) == pytest.approx(math.exp(-0.5), abs=1e-10)
    both = averaging.average_against_mu(np.stack([nodes ** 2, np.ones_like(nodes)], axis=1), density)
    np.testing.assert_allclose(both, [1.0, 1.0], atol=1e-8)


@pytest.mark.parametrize("slope", [np.inf, 1e7])
def test_averaged_path_refuses_a_non_lipschitz_drift(averaging, slope):
    drift = AveragedDrift(
        evaluate=lambda x: np.ones_like(x),
        gradient=lambda x: np.array([[slope]]),
        method="analytic",
        dimension=1,
    )
    with pytest.raises(NonLipschitzDrift) as error:
        averaging.solve_xbar(drift, [0.0], nodes=65)
    assert error.value.time == 0.0
    assert not error.value.norm <= 1e6


def test_averaged_path_accepts_a_bounded_jacobian(averaging):
    drift = AveragedDrift(lambda x: -x, lambda x: -np.eye(1), "analytic", 1)
    path = averaging.solve_xbar(drift, [1.0], nodes=65)
    assert path.values[-1, 0] == pytest.approx(math.exp(-1.0), abs=1e-7)
