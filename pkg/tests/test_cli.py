import csv

import pytest
from click.testing import CliRunner
from scipy import special

from core.exception_handlers import EXIT_OK, EXIT_RUNTIME_ERROR, EXIT_USAGE, EXIT_VALIDATION_FAILED
from main import create_application, run_subcommand
from repositories.builtin_models import example3_q
from repositories.model_repository import read_toml


def run(*argv):
    return run_subcommand([str(arg) for arg in argv])


def test_validate_writes_the_report_and_manifest(tmp_path):
    assert run("validate", "--model", "example1", "--out", tmp_path) == EXIT_OK
    report = (tmp_path / "conditions.txt").read_text()
    assert "# model_name = example1" in report
    assert "passed = true" in report
    manifest = read_toml(str(tmp_path / "manifest.txt"))
    assert manifest["command"] == "validate"
    assert manifest["model"] == "example1"


def test_failed_conditions_exit_with_two(tmp_path):
    assert run("validate", "--r", "0.5", "--out", tmp_path) == EXIT_VALIDATION_FAILED
    assert "tightness" in (tmp_path / "conditions.txt").read_text()
    assert (tmp_path / "manifest.txt").exists()


def test_pipelines_refuse_failed_models_unless_forced(tmp_path):
    assert run("invariant", "--r", "0.5", "--out", tmp_path / "refused") == EXIT_VALIDATION_FAILED
    assert not (tmp_path / "refused" / "invariant.csv").exists()

    assert run("invariant", "--r", "0.5", "--force", "--out", tmp_path / "forced") == EXIT_OK
    assert "# unvalidated = true" in (tmp_path / "forced" / "invariant.csv").read_text()


def test_malformed_flags_exit_with_64(tmp_path):
    assert run("validate", "--no-such-flag", "--out", tmp_path) == EXIT_USAGE
    assert run("validate", "--set", "A", "--out", tmp_path) == EXIT_USAGE
    assert run("validate", "--model", "custom", "--out", tmp_path) == EXIT_USAGE


def test_estimate_needs_an_event(tmp_path):
    assert run("estimate", "--paths", "8", "--out", tmp_path) == EXIT_USAGE


def test_unknown_model_is_a_runtime_error(tmp_path):
    assert run("validate", "--model", "example9", "--out", tmp_path) == EXIT_RUNTIME_ERROR


def test_manifest_replays_the_run(tmp_path):
    first = tmp_path / "first"
    assert run("validate", "--model", "example1", "--set", "A=0.5", "--out", first) == EXIT_OK
    second = tmp_path / "second"
    assert run("validate", "--config", first / "manifest.txt", "--out", second) == EXIT_OK
    replayed = read_toml(str(second / "manifest.txt"))
    assert replayed["model"] == "example1"
    assert replayed["overrides"] == {"A": 0.5}
    assert replayed["output_dir"] == str(second)


def test_simulate_writes_quantiles(tmp_path):
    code = run("simulate", "--eps", "0.05", "--paths", "16", "--out", tmp_path)
    assert code == EXIT_OK
    lines = (tmp_path / "simulate.csv").read_text().splitlines()
    assert any(line.startswith("# epsilon = 0.0500000") for line in lines)


@pytest.mark.slow
def test_estimate_with_weights(tmp_path):
    code = run("estimate", "--event", "eta1>=0.5", "--eps", "0.05", "--paths", "32",
               "--method", "both", "--weights", "--out", tmp_path)
    assert code == EXIT_OK
    estimate = (tmp_path / "estimate.txt").read_text()
    assert "s_star = " in estimate
    assert "eps.0.05.plain.estimate" in estimate
    assert "eps.0.05.is.estimate" in estimate
    assert (tmp_path / "weights.csv").exists()


def test_command_group_lists_every_subcommand():
    result = CliRunner().invoke(create_application(), ["--help"])
    assert result.exit_code == 0
    for name in ("validate", "invariant", "poisson", "averaged", "rate", "action", "minimize",
                 "simulate", "limit-check", "estimate"):
        assert name in result.output


def test_rate_table_through_the_runner(tmp_path):
    result = CliRunner().invoke(
        create_application(), ["rate", "--model", "example2", "--x", "1.0", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "rate.csv").exists()


def read_table(path):
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def test_rate_for_example2_matches_the_bessel_closed_form(tmp_path):
    assert run("rate", "--model", "example2", "--out", tmp_path) == EXIT_OK
    rows = read_table(tmp_path / "rate.csv")
    # q = 2 D / I0(A / D)^2 with A = D = 1
    assert float(rows[0]["q"]) == pytest.approx(2.0 / special.i0(1.0) ** 2, abs=1e-6)
    assert float(rows[0]["q"]) == pytest.approx(1.247721, abs=1e-6)


@pytest.mark.parametrize("regime, expected", [(1, 1.0), (2, example3_q(0.5, 2))])
def test_rate_for_example3_runs_in_both_regimes(tmp_path, regime, expected):
    assert run("rate", "--model", "example3", "--regime", regime, "--out", tmp_path) == EXIT_OK
    rows = read_table(tmp_path / "rate.csv")
    assert float(rows[0]["x"]) == pytest.approx(0.5)
    assert float(rows[0]["q"]) == pytest.approx(expected, abs=1e-4)


@pytest.mark.slow
def test_simulation_output_is_identical_across_workers_and_replays(tmp_path, monkeypatch):
    monkeypatch.setenv("SIM_BLOCK_SIZE", "8")
    flags = ["simulate", "--eps", "0.05", "--paths", "32", "--seed", "11"]
    assert run(*flags, "--workers", "1", "--out", tmp_path / "serial") == EXIT_OK
    assert run(*flags, "--workers", "4", "--out", tmp_path / "threaded") == EXIT_OK
    assert run("simulate", "--config", tmp_path / "threaded" / "manifest.txt",
               "--out", tmp_path / "replayed") == EXIT_OK
    serial = (tmp_path / "serial" / "simulate.csv").read_bytes()
    assert (tmp_path / "threaded" / "simulate.csv").read_bytes() == serial
    assert (tmp_path / "replayed" / "simulate.csv").read_bytes() == serial
