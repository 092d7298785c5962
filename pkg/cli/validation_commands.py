"""
validate: admissibility report for a model.
"""

import logging

import click

from cli.common import RunContext, common_options, float_list_option, run_command
from exceptions.model_exceptions import ConditionCheckFailed

logger = logging.getLogger(__name__)


@click.command("validate")
@common_options
@float_list_option("--x", help="Slow state for the scans (defaults to x0)")
@click.option("--scan-radius", type=float, help="Radius of the fast-variable recurrence scan")
@run_command("validate")
def validate(run: RunContext):
    """
    Check the scaling regime, tightness exponents, recurrence, growth,
    ellipticity and centering conditions. Exits with code 2 when a check fails.
    """
    report = run.condition_report()
    run.artifacts.write_key_values("conditions.txt", report.key_values(), {"model_name": run.model.name})
    for name, verdict in report.verdicts.items():
        click.echo(f"{name:<24} {verdict.status:<10} {verdict.detail}")
    if not report.passed:
        run.finish()
        failures = {name: verdict.witness for name, verdict in report.failures().items()}
        raise ConditionCheckFailed(f"Model {run.model.name} failed {len(failures)} condition check(s)", failures)
    logger.info(f"Model {run.model.name} passed all condition checks")
