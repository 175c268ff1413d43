import sys
import os
from behave import given, when, then

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from flows import DeltaSpec, intertwine_sweep, random_bracket_suite, run_flow_checks


@when('I check every intertwining identity up to degree {max_degree:d}')
def step_impl(context, max_degree):
    context.sweep = intertwine_sweep(max_degree)


@then('all of them vanish')
def step_impl(context):
    failures = [index for index, ok in sorted(context.sweep.items()) if not ok]
    assert context.sweep and not failures, f"Intertwining fails at {failures}"


@when('I run the seeded bracket suite at order {N:d}')
def step_impl(context, N):
    context.suite = random_bracket_suite(context.run_config.seed, N=N)


@then('every bracket residual is zero')
def step_impl(context):
    failures = [case for case in context.suite if not case[-1]]
    assert not failures, f"{len(failures)} bracket cases do not vanish"


@given('the derivation "{text}" at order {N:d}')
def step_impl(context, text, N):
    context.delta = DeltaSpec.from_text(text, N)
    context.order = N


@when('I run the flow checks')
def step_impl(context):
    context.report = run_flow_checks(context.delta, context.order, seed=context.run_config.seed)


@then('R at tau = 1 equals 1 - YX - C')
def step_impl(context):
    assert context.report.R_matches_closed_form is True


@then('the conjugation residual is zero')
def step_impl(context):
    assert context.report.conjugation_residual_zero is True


@then('the quadratic residual is zero')
def step_impl(context):
    assert context.report.quadratic_residual_zero is True


@then('the abelianized flow matches the binomial transform')
def step_impl(context):
    assert context.report.abelian_ok is True
    assert context.report.passed, f"Failures: {context.report.failures}"


@when('I run the flow checks without the Catalan closed form')
def step_impl(context):
    context.report = run_flow_checks(context.delta, context.order, max_degree=4, catalan=False,
                                     seed=context.run_config.seed, bracket_cases=5)
