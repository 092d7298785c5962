import numpy as np
import pytest
from scipy import special

from exceptions.model_exceptions import InvalidModelDefinition
from exceptions.numerics_exceptions import CenteringViolation, FredholmViolation, SingularSystem
from repositories.builtin_models import BUILTIN_MODELS
from repositories.model_repository import compile_model


@pytest.fixture
def poisson(container):
    return container.get_poisson_service()


@pytest.fixture
def ou_density(container, example1):
    return container.get_fast_dynamics_service().invariant_density(example1, [0.5])


def hermite(k, y):
    return special.eval_hermitenorm(k, y)


@pytest.mark.parametrize("method", ["quadrature", "fd"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_hermite_right_hand_sides(poisson, example1, ou_density, method, k):
    # L He_k = -(k/2) He_k for the generator -y/2 d/dy + 1/2 d^2/dy^2
    nodes = ou_density.grid.nodes
    solution = poisson.solve(example1, [0.5], hermite(k, nodes), ou_density, method)
    inner = np.abs(nodes) <= 3.0
    np.testing.assert_allclose(solution.values[inner, 0], 2.0 / k * hermite(k, nodes[inner]), atol=1e-4)
    assert solution.method == method
    assert solution.centering_defect < 1e-9


@pytest.mark.parametrize("name, regime, x", [("example1", None, 0.5), ("example2", None, 1.0),
                                             ("example3", 1, 0.5), ("example3", 2, 0.5)])
def test_solvers_agree(poisson, container, models, name, regime, x):
    model = models.get(name, regime)
    density = container.get_fast_dynamics_service().invariant_density(model, [x])
    nodes = density.grid.nodes
    raw = np.stack([np.cos(nodes), np.sin(nodes)], axis=1)
    rhs = raw - density.integrate(raw)[None, :]
    by_quadrature = poisson.solve_poisson_quadrature_1d(model, [x], rhs, density)
    by_fd = poisson.solve_poisson_fd_1d(model, [x], rhs, density)
    _, diffusion = container.get_fast_dynamics_service().coefficients_on_grid(model, [x], density.grid)
    trusted = density.grid.trusted_mask(density.values, diffusion)
    assert by_quadrature.columns == 2
    assert by_quadrature.certified and by_fd.certified
    np.testing.assert_allclose(by_quadrature.values[trusted], by_fd.values[trusted], atol=1e-4)
    np.testing.assert_allclose(by_quadrature.dy_values[trusted], by_fd.dy_values[trusted], atol=1e-4)


@pytest.mark.parametrize("method", ["quadrature", "fd"])
def test_cir_corrector_is_certified_next_to_the_entrance_boundary(poisson, container, models, method):
    model = models.get("example3", 2)
    density = container.get_fast_dynamics_service().invariant_density(model, [0.5])
    nodes = density.grid.nodes
    c = nodes / (1.0 + nodes) - 0.5
    phi = poisson.corrector_phi(model, [0.5], density, (c - density.integrate(c))[:, None], method)
    assert phi.certified
    assert phi.residual_sup < 1e-5
    # at the entrance end the equation reduces to a b Phi'(0) = -(c(0) - c_bar) with a = b = 1
    slope_at_zero = -(float(c[0]) - float(density.integrate(c)))
    assert phi.dy_values[0, 0] == pytest.approx(slope_at_zero, rel=1e-2)


def test_uncentered_right_hand_side_is_refused(poisson, example1, ou_density):
    nodes = ou_density.grid.nodes
    with pytest.raises(FredholmViolation) as error:
        poisson.solve(example1, [0.5], np.cos(nodes), ou_density)
    assert error.value.component == 1


def test_zero_right_hand_side_gives_zero(poisson, example1, ou_density):
    solution = poisson.solve(example1, [0.5], np.zeros(ou_density.grid.size), ou_density)
    assert not np.any(solution.values)
    assert solution.certified


def test_unknown_solver(poisson):
    with pytest.raises(InvalidModelDefinition):
        poisson.solver("spectral")


def test_cell_problem_on_the_torus(poisson, container, example2):
    density = container.get_fast_dynamics_service().invariant_density(example2, [1.0])
    chi = poisson.cell_chi(example2, [1.0], density)
    assert chi.method == "quadrature"
    assert chi.certified
    # int (1 + chi') dmu = 1 / (Z Z_hat) for first-order Langevin dynamics
    assert 1.0 + float(density.integrate(chi.dy_values[:, 0])) == pytest.approx(
        1.0 / special.i0(1.0) ** 2, abs=1e-6
    )


def test_cell_problem_needs_regime1_and_a_centered_drift(poisson, container, example1, ou_density):
    with pytest.raises(InvalidModelDefinition):
        poisson.cell_chi(example1, [0.5], ou_density)
    document = BUILTIN_MODELS["example2"].definition()
    document["coefficients"]["b"] = "1 + 2 * pi * A * sin(2 * pi * y1)"
    model = compile_model(document)
    density = container.get_fast_dynamics_service().invariant_density(model, [1.0])
    with pytest.raises(CenteringViolation):
        poisson.cell_chi(model, [1.0], density)


def test_non_reversible_fast_motion_uses_finite_differences(poisson, container):
    document = BUILTIN_MODELS["example2"].definition()
    document["coefficients"]["f"] = "1 + 2 * pi * A * sin(2 * pi * y1)"
    model = compile_model(document)
    density = container.get_fast_dynamics_service().invariant_density(model, [1.0])
    assert abs(density.flux) > 1e-3
    rhs = np.cos(2 * np.pi * density.grid.nodes)
    rhs = rhs - density.integrate(rhs)
    with pytest.raises(SingularSystem):
        poisson.solver("quadrature").solve(model, [1.0], rhs, density)
    assert poisson.solve(model, [1.0], rhs, density, "quadrature").method == "fd"
    assert poisson.solve(model, [1.0], rhs, density).method == "fd"
