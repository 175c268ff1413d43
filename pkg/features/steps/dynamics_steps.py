import sys
import os
import logging
from behave import when, then

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from config import RunConfig
from dynamics import lax_residual, lax_spectrum_check, period3_check

logger = logging.getLogger("behave_test")


def _field_tags(context, fields):
    config = RunConfig(fields=[f.strip() for f in fields.split(",")], primes=context.run_config.primes)
    return config.field_tags


@when('I check the Lax residual at d = {d:d} over {fields} with {trials:d} trials')
def step_impl(context, d, fields, trials):
    t_values = context.run_config.t_fractions
    context.verdicts = [lax_residual(d, tag, t_values, trials, context.run_config.seed)
                        for tag in _field_tags(context, fields)]


@then('every Lax verdict is zero evidence')
def step_impl(context):
    for verdict in context.verdicts:
        assert verdict.is_zero, f"{verdict.field} d={verdict.d}: {verdict.verdict} {verdict.witness}"


@when('I compare Lax spectra at d = {d:d} for t = {t_values}')
def step_impl(context, d, t_values):
    context.spectra = [lax_spectrum_check(d, "QQ", t.strip(), context.run_config.seed)
                       for t in t_values.split(",")]


@then('the spectra agree')
def step_impl(context):
    for same, detail in context.spectra:
        assert same, f"Spectrum moved: {detail}"


@when('I run the period-three harness at d = {d:d} over {fields} with {trials:d} trials')
def step_impl(context, d, fields, trials):
    context.conjecture = [period3_check(d, tag, trials, context.run_config.seed)
                          for tag in _field_tags(context, fields)]
    context.trials = trials


@then('the harness sanity criterion holds')
def step_impl(context):
    for report in context.conjecture:
        assert report.sanity_ok, f"Sanity failed for d={report.d} over {report.field}"


@then('the degeneracy rate is below one half')
def step_impl(context):
    for report in context.conjecture:
        assert report.degeneracy_rate < 0.5, f"Degeneracy rate {report.degeneracy_rate:.3f}"


@then('the outcome is recorded with reproducer seeds')
def step_impl(context):
    for report in context.conjecture:
        assert len(report.trials) == context.trials
        assert all(isinstance(trial.seed, int) for trial in report.trials)
        for finding in report.findings:
            logger.warning(f"FINDING d={report.d} {report.field}: seed {finding.seed}, "
                           f"residual {finding.residual}")
