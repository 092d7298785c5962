import math

import numpy as np
import pytest

from exceptions.model_exceptions import MissingScalingFamily
from repositories.builtin_models import BUILTIN_MODELS
from repositories.model_repository import compile_model
from schemas.run_config import SimConfig
from services.simulation_service import constant_control


@pytest.fixture
def simulation(container):
    return container.get_simulation_service()


def test_plan_follows_the_scaling_family(simulation, example1):
    plan = simulation.plan(example1, SimConfig(epsilon=0.05, path_count=8))
    assert plan.delta == pytest.approx(0.05)
    assert plan.h == pytest.approx(0.05 ** -0.25)
    # fast time delta^2 / eps = 0.05, so the dt cap of 1/1024 binds
    assert plan.steps == 1024
    assert plan.dt == pytest.approx(1.0 / 1024.0)
    assert plan.records == (0, 1024)


def test_plan_record_stride(simulation, example1):
    plan = simulation.plan(example1, SimConfig(epsilon=0.05, path_count=8, record_stride=300))
    assert plan.records == (0, 300, 600, 900, 1024)


def test_plan_h_override(simulation, example1):
    assert simulation.plan(example1, SimConfig(epsilon=0.05, h=3.0), need_h=True).h == 3.0


def test_regime1_simulation_needs_a_family(simulation):
    document = BUILTIN_MODELS["example2"].definition()
    document["regime"] = {"regime": 1}
    with pytest.raises(MissingScalingFamily):
        simulation.plan(compile_model(document), SimConfig(epsilon=0.05))


def test_regime2_without_h_needs_a_family_only_for_control(simulation):
    document = BUILTIN_MODELS["example1"].definition()
    document["regime"] = {"regime": 2, "gamma": 2.0}
    model = compile_model(document)
    plan = simulation.plan(model, SimConfig(epsilon=0.05))
    assert plan.delta == pytest.approx(0.025)
    assert plan.h == 1.0
    with pytest.raises(MissingScalingFamily):
        simulation.plan(model, SimConfig(epsilon=0.05), need_h=True)


def test_uncontrolled_batch_shapes(simulation, example1):
    batch = simulation.simulate_uncontrolled(example1, SimConfig(epsilon=0.05, path_count=12, record_stride=256))
    assert batch.path_count == 12
    assert batch.x.shape == (12, 5, 1)
    assert batch.eta.shape == (12, 5, 1)
    np.testing.assert_allclose(batch.times, [0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_array_equal(batch.eta[:, 0, :], 0.0)
    assert not np.any(batch.log_weights)
    assert not np.any(batch.control_energy)
    assert np.all(np.isfinite(batch.final_eta))


def test_paths_do_not_depend_on_blocks_or_workers(simulation, example1):
    base = SimConfig(epsilon=0.05, path_count=24, seed=7, block_size=24)
    reference = simulation.simulate_uncontrolled(example1, base)
    split = simulation.simulate_uncontrolled(
        example1, base.model_copy(update={"block_size": 5, "workers": 3})
    )
    np.testing.assert_array_equal(split.x, reference.x)
    np.testing.assert_array_equal(split.y, reference.y)
    np.testing.assert_array_equal(split.eta, reference.eta)


def test_seeds_change_the_paths(simulation, example1):
    first = simulation.simulate_uncontrolled(example1, SimConfig(epsilon=0.05, path_count=4, seed=1))
    second = simulation.simulate_uncontrolled(example1, SimConfig(epsilon=0.05, path_count=4, seed=2))
    assert not np.allclose(first.final_x, second.final_x)


def test_zero_control_is_the_nominal_dynamics(simulation, example1):
    sim = SimConfig(epsilon=0.05, path_count=8, seed=3)
    nominal = simulation.simulate_uncontrolled(example1, sim)
    controlled = simulation.simulate_controlled(example1, sim, constant_control([0.0, 0.0]))
    np.testing.assert_array_equal(controlled.x, nominal.x)
    np.testing.assert_array_equal(controlled.y, nominal.y)
    np.testing.assert_array_equal(controlled.log_weights, 0.0)


def test_constant_control_shifts_the_deviation(simulation, example1):
    sim = SimConfig(epsilon=0.05, path_count=8, seed=3)
    nominal = simulation.simulate_uncontrolled(example1, sim)
    controlled = simulation.simulate_controlled(example1, sim, constant_control([1.0, 0.0]))
    # sigma = 1, so the tilt adds u1 = 1 to the deviation drift
    shift = controlled.final_eta - nominal.final_eta
    # damped by the averaged Jacobian, which is negative along the path
    assert 0.5 < float(np.mean(shift)) < 1.0
    np.testing.assert_allclose(controlled.control_energy, 1.0, rtol=1e-9)


def test_constant_control_broadcasts():
    control = constant_control([0.5, -1.0])
    values = control(0.0, np.zeros((3, 1)), np.zeros((3, 1)), np.zeros((3, 1)))
    assert values.shape == (3, 2)
    np.testing.assert_array_equal(values[:, 1], -1.0)


@pytest.mark.slow
@pytest.mark.parametrize("control", [[1.0, 0.0], [0.0, 1.0]])
def test_controlled_limit_check_report(simulation, container, example1, control):
    ingredients = container.get_rate_service().build_ingredients(example1)
    sim = SimConfig(epsilon=1e-2, path_count=1000, seed=11)
    epsilons = [1e-2, 3e-3, 1e-3]
    report = simulation.controlled_limit_check(example1, ingredients, control, epsilons, sim)
    assert report.epsilons == epsilons
    assert len(report.gaps) == len(report.std_errors) == 3
    assert report.control == control
    assert all(math.isfinite(gap) for gap in report.gaps)
    assert report.monotone
    assert report.passed
    if control == [1.0, 0.0]:
        # psi' = A(t) psi + 1 with A = -e^{-1/2} sin(X_bar) <= 0 along the averaged path
        assert 0.0 < report.psi_final[0] <= 1.0


@pytest.mark.slow
def test_fast_moment_diagnostic(simulation, example1):
    diagnostic = simulation.y_moment_diagnostic(
        example1, SimConfig(epsilon=0.05, path_count=64, seed=5), 2.0, [0.05, 0.02]
    )
    assert diagnostic.finite
    assert diagnostic.epsilons == [0.05, 0.02]
    # stationary second moment of the standard Ornstein-Uhlenbeck motion
    for estimate in diagnostic.estimates:
        assert estimate == pytest.approx(1.0, abs=0.3)


@pytest.mark.slow
def test_fluctuations_have_the_lyapunov_variance(simulation, container, example1):
    rates = container.get_rate_service()
    xbar = simulation.averaged_path(example1)
    variance = rates.lyapunov_variance(rates.build_ingredients(example1), xbar)[-1, 0, 0]
    # h = 1 is the central-limit scaling
    sim = SimConfig(epsilon=1e-3, path_count=10000, seed=13, h=1.0)
    batch = simulation.simulate_uncontrolled(example1, sim)
    sample = float(np.var(batch.final_eta[:, 0], ddof=1))
    assert sample == pytest.approx(variance, rel=0.1)


def test_averaged_paths_are_shared_between_equal_models(simulation, models, example1):
    path = simulation.averaged_path(example1, nodes=65)
    assert simulation.averaged_path(models.get("example1"), nodes=65) is path
    document = BUILTIN_MODELS["example1"].definition()
    document["initial"]["x0"] = [1.5]
    moved = compile_model(document)
    assert moved.fingerprint == example1.fingerprint
    assert simulation.averaged_path(moved, nodes=65) is not path
