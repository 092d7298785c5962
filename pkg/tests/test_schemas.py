import math

import pytest
from pydantic import ValidationError

from exceptions.simulation_exceptions import InvalidEventSpec
from schemas.model_config import RegimeScaling, ScalingFamily
from schemas.run_config import EventSpec, RunConfig, SimConfig, parse_grid


class TestEventSpec:

    def test_component_form(self):
        event = EventSpec.parse("eta2<=-0.5", 3)
        assert event.functional == (0.0, 1.0, 0.0)
        assert event.threshold == -0.5
        assert event.direction == "<="
        assert event.sign == -1.0

    def test_linear_form(self):
        event = EventSpec.parse(" 1,-1.eta >= 1e-1 ", 2)
        assert event.functional == (1.0, -1.0)
        assert event.threshold == pytest.approx(0.1)
        assert event.text() == "1.0,-1.0.eta>=0.1"

    def test_bare_eta_in_one_dimension(self):
        assert EventSpec.parse("eta>=2", 1).functional == (1.0,)

    def test_infinite_thresholds(self):
        assert EventSpec.parse("eta1>=-inf", 1).threshold == -math.inf
        assert EventSpec.parse("eta1<=inf", 1).threshold == math.inf

    @pytest.mark.parametrize("spec, dimension", [
        ("eta1>0.5", 1),
        ("eta3>=0.5", 2),
        ("1,2.eta>=0", 3),
        ("a,b.eta>=0", 2),
        ("0,0.eta>=1", 2),
        ("x1>=0", 1),
        ("", 1),
    ])
    def test_rejected_forms(self, spec, dimension):
        with pytest.raises(InvalidEventSpec):
            EventSpec.parse(spec, dimension)


class TestRunConfig:

    def test_defaults(self):
        config = RunConfig(command="validate")
        assert config.model == "example1"
        assert config.solver == "auto"
        assert config.paths == 1000

    def test_unknown_keys_are_refused(self):
        with pytest.raises(ValidationError):
            RunConfig(command="validate", colour="blue")

    def test_epsilon_range(self):
        with pytest.raises(ValidationError):
            RunConfig(command="estimate", eps=[0.1, 1.0])

    def test_custom_model_needs_a_file(self):
        with pytest.raises(ValidationError):
            RunConfig(command="validate", model="custom")
        assert RunConfig(command="validate", model="custom", model_file="m.toml").model_file == "m.toml"

    def test_stencil_order(self):
        with pytest.raises(ValidationError):
            RunConfig(command="invariant", stencil_order=3)


class TestSimConfig:

    def test_substeps_lower_bound(self):
        with pytest.raises(ValidationError):
            SimConfig(epsilon=0.1, substeps=10)

    @pytest.mark.parametrize("epsilon", [0.0, 1.0, -0.1])
    def test_epsilon_bounds(self, epsilon):
        with pytest.raises(ValidationError):
            SimConfig(epsilon=epsilon)


class TestScaling:

    def test_family(self):
        family = ScalingFamily(c_delta=2.0, p=1.25, q_h=0.25)
        assert family.delta(0.0625) == pytest.approx(2.0 * 0.0625 ** 1.25)
        assert family.h(0.0625) == pytest.approx(2.0)

    def test_regime1_needs_p_above_one(self):
        with pytest.raises(ValidationError):
            RegimeScaling(regime=1, scaling_family={"c_delta": 1.0, "p": 1.0, "q_h": 0.25})

    def test_regime2_needs_gamma_or_family(self):
        with pytest.raises(ValidationError):
            RegimeScaling(regime=2)
        assert RegimeScaling(regime=2, scaling_family={"c_delta": 0.5, "p": 1.0, "q_h": 0.25}).effective_gamma == 2.0


def test_parse_grid():
    assert parse_grid("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("2:3:1") == [2.0]
    for spec in ("0:1", "0:1:0", ""):
        with pytest.raises(ValueError):
            parse_grid(spec)
