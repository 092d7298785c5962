import dataclasses

import pytest

from exceptions.model_exceptions import DegenerateScan, DivergentLimit, EmptyProbeSet, MissingScalingFamily
from repositories.builtin_models import BUILTIN_MODELS
from repositories.model_repository import compile_model
from schemas.model_config import GrowthErgodicityParams, RegimeScaling


def regime(index, **family):
    if not family:
        return RegimeScaling(regime=index, gamma=1.0) if index == 2 else RegimeScaling(regime=index)
    return RegimeScaling(regime=index, scaling_family=family)


@pytest.fixture
def conditions(container):
    return container.get_condition_service()


def with_exponents(model, **updates):
    return dataclasses.replace(model, exponents=model.exponents.model_copy(update=updates))


# -- tightness ---------------------------------------------------------------------

@pytest.mark.parametrize("r, status", [("0.8", "pass"), ("0.79", "fail"), ("1", "pass")])
def test_regime1_recurrence_threshold_is_four_fifths(conditions, r, status):
    params = GrowthErgodicityParams(r=float(r))
    verdict = conditions.check_tightness(params, regime(1)).verdicts["tightness"]
    assert verdict.status == status


@pytest.mark.parametrize("r, status", [("0.75", "pass"), ("0.74", "fail")])
def test_regime2_recurrence_threshold_is_three_quarters(conditions, r, status):
    params = GrowthErgodicityParams(r=float(r))
    verdict = conditions.check_tightness(params, regime(2)).verdicts["tightness"]
    assert verdict.status == status


def test_tightness_equality_is_allowed_in_the_first_group(conditions):
    at_bound = GrowthErgodicityParams(q_b=0.5, q_c=0.5, r=1.0)
    above = GrowthErgodicityParams(q_b=0.51, q_c=0.5, r=1.0)
    assert conditions.check_tightness(at_bound, regime(2)).passed
    report = conditions.check_tightness(above, regime(2))
    witness = report.verdicts["tightness"].witness
    assert not report.passed
    assert witness["inequality"].endswith("<= r")
    assert witness["lhs"] == "51/50"


def test_sigma_growth_witness_names_the_violated_term(conditions):
    report = conditions.check_tightness(GrowthErgodicityParams(q_sigma=0.6, r=1.0), regime(1))
    witness = report.verdicts["tightness"].witness
    assert "2q_sigma" in witness["inequality"]
    assert witness["lhs"] == "6/5"


# -- scale ratios ---------------------------------------------------------------------

def test_regime1_limit_constant_from_the_family(conditions):
    assert conditions.limit_constants_from_family(regime(1, c_delta=2.0, p=1.25, q_h=0.25)) == 2.0
    assert conditions.limit_constants_from_family(regime(1, c_delta=2.0, p=1.5, q_h=0.25)) == 0.0
    with pytest.raises(DivergentLimit) as error:
        conditions.limit_constants_from_family(regime(1, c_delta=1.0, p=1.1, q_h=0.25))
    assert error.value.exponent_gap < 0


def test_regime2_limit_constant_vanishes_on_the_exact_family(conditions):
    assert conditions.limit_constants_from_family(regime(2, c_delta=0.5, p=1.0, q_h=0.25)) == 0.0


def test_limit_constant_needs_a_family(conditions):
    with pytest.raises(MissingScalingFamily):
        conditions.limit_constants_from_family(regime(1))


def test_resolve_regime_fills_missing_constants(conditions):
    resolved = conditions.resolve_regime(regime(2, c_delta=0.5, p=1.0, q_h=0.25))
    assert resolved.gamma == pytest.approx(2.0)
    assert resolved.j2 == 0.0
    assert conditions.resolve_regime(regime(1)).j1 == 0.0


# -- scans ----------------------------------------------------------------------------

def test_recurrence_scan_reports_a_witness(conditions, example1):
    model = with_exponents(example1, recurrence_gamma=0.6)
    verdict = conditions.check_recurrence_scan(model, 10.0, [[0.5]], 20).verdicts["recurrence"]
    assert verdict.status == "fail"
    assert verdict.witness["y_dot_drift"] > verdict.witness["bound"]


def test_recurrence_scan_rejects_degenerate_input(conditions, example1):
    with pytest.raises(EmptyProbeSet):
        conditions.check_recurrence_scan(example1, 10.0, [], 20)
    with pytest.raises(DegenerateScan):
        conditions.check_recurrence_scan(example1, 0.5, [[0.5]], 20)


def test_recurrence_is_not_required_on_the_torus(conditions, example2):
    verdict = conditions.check_recurrence_scan(example2, 10.0, [[1.0]], 20).verdicts["recurrence"]
    assert verdict.status == "unchecked"


def test_growth_scan_flags_an_undeclared_exponent(conditions):
    document = BUILTIN_MODELS["example1"].definition()
    document["coefficients"]["b"] = "y1 ^ 2"
    document["coefficients"].pop("grad_b")
    model = compile_model(document)
    report = conditions.check_growth_scan(model, ([0.0], [1.0]), 3)
    assert report.verdicts["growth.b"].status == "fail"
    assert report.verdicts["growth.b"].witness["slope"] > 1.5
    assert report.verdicts["growth.sigma"].status == "pass"


def test_growth_scan_box_needs_an_interior(conditions, example1):
    with pytest.raises(DegenerateScan):
        conditions.check_growth_scan(example1, ([1.0], [1.0]), 3)


def test_centering_failure_is_reported_in_regime1(conditions):
    document = BUILTIN_MODELS["example2"].definition()
    document["coefficients"]["b"] = "1 + 2 * pi * A * sin(2 * pi * y1)"
    report = conditions.validate_model(compile_model(document))
    verdict = report.verdicts["centering"]
    assert verdict.status == "fail"
    assert verdict.witness["mean"] == pytest.approx(1.0, abs=1e-8)


# -- aggregate ----------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["example1", "example2"])
def test_builtins_pass_validation(conditions, models, name):
    report = conditions.validate_model(models.get(name))
    assert report.passed, report.failures()


def test_example3_declares_degenerate_noise(conditions, example3):
    report = conditions.validate_model(example3)
    assert report.verdicts["ellipticity"].status == "unchecked"


def test_lowering_r_fails_only_the_exponent_check(conditions, example1):
    report = conditions.validate_model(with_exponents(example1, r=0.5))
    assert set(report.failures()) == {"tightness"}
    keys = dict(report.key_values())
    assert keys["passed"] is False
    assert keys["tightness.witness.r"] == "1/2"
