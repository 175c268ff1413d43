import sys
import os
from behave import when, then

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from dynamics import MapSpec, iterate_map
from laurent_recover import coefficient_set_check, recover_iterate
from nc_core import format_word
from cli import recover_map


@when('I recover the second component of S1 iterate 2')
def step_impl(context):
    spec = MapSpec.parse("S1")
    state = iterate_map(spec, 2)[2]
    context.candidate = recover_iterate(state[1], spec.alphabet, seed=context.run_config.seed)


@then('the recovered support is "{words}" with unit coefficients')
def step_impl(context, words):
    candidate = context.candidate
    assert candidate.verified
    found = {format_word(w, candidate.alphabet) for w in candidate.coefficients}
    assert found == {w.strip() for w in words.split(",")}, f"Support {sorted(found)}"
    assert coefficient_set_check(candidate, {1}) == (True, [])


@when('I recover iterates 1 to {steps:d} of {map_name}')
def step_impl(context, steps, map_name):
    rows, _ = recover_map(MapSpec.parse(map_name), steps, context.run_config)
    context.rows = rows


@then('every recovered row is verified or records a budget hit')
def step_impl(context):
    for row in context.rows:
        assert "budget_hit" in row or row["verified"], f"{row['target']} not verified"


@then('every recovered coefficient lies in {{0, 1}}')
def step_impl(context):
    for row in context.rows:
        if "budget_hit" not in row:
            assert row["coefficient_set"]["ok"], f"{row['target']}: {row['offenders']} offending coefficients"


@then('every recovered coefficient is an integer')
def step_impl(context):
    for row in context.rows:
        if "budget_hit" not in row:
            assert row["coefficient_set"]["ok"], f"{row['target']}: {row['offenders']} non-integer coefficients"


@then('U5 equals "{text}"')
def step_impl(context, text):
    row = next(r for r in context.rows if r["target"] == "U5")
    assert "budget_hit" not in row
    support = {word: coefficient for word, coefficient in row["support"]}
    assert support == {term.strip(): "1" for term in text.split("+")}, f"U5 support {support}"
