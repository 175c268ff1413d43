import sys
import os
import random
import sympy
from behave import given, when, then

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from spectral import char_series, closed_form_plus_inverses, necklace_product, plus_inverses, random_element
from guessing import guess_family_evidence, slice_evidence, transform_battery


@given('the element plus-inverses with n = {n:d}')
def step_impl(context, n):
    context.n = n
    context.element = plus_inverses(n)


@when('I compute the characteristic series to order {N:d}')
def step_impl(context, N):
    context.series = char_series(context.element, N)


@then('it equals the square-root closed form to order {N:d}')
def step_impl(context, N):
    closed = closed_form_plus_inverses(context.n, N)
    assert context.series.agrees_with(closed, N), f"P differs from the closed form for n={context.n}"


@then('the coefficients are "{values}"')
def step_impl(context, values):
    expected = [int(v) for v in values.split(",")]
    actual = context.series.coefficients()
    assert actual == expected, f"Expected {expected}, got {actual}"


@given('{count:d} seeded random integer elements')
def step_impl(context, count):
    rng = random.Random(context.run_config.seed)
    context.elements = [random_element(rng) for _ in range(count)]


@then('the necklace product equals the characteristic series to order {N:d} for every element')
def step_impl(context, N):
    context.results["series"] = []
    for element in context.elements:
        P = char_series(element, N)
        assert necklace_product(element, N).agrees_with(P, N), f"Necklace mismatch for {element.to_text()}"
        context.results["series"].append(P)


@then('every characteristic series has integer coefficients')
def step_impl(context):
    for P in context.results["series"]:
        assert P.is_integral(), f"Non-integral coefficients: {P.coefficients()}"


@when('I guess the annihilator of the family "{family}"')
def step_impl(context, family):
    context.entry = guess_family_evidence(family)


@when('I guess the annihilator of the diagonal slice of "{polynomial}"')
def step_impl(context, polynomial):
    context.entry = slice_evidence(polynomial, polynomial)


@then('a verified annihilator is found with S-degree {degs:d}')
def step_impl(context, degs):
    entry = context.entry
    assert entry.verified, f"No verified annihilator for {entry.series_id}"
    assert entry.annihilator.deg_s == degs, f"Found degS={entry.annihilator.deg_s}"


@then('it matches the recorded annihilator')
def step_impl(context):
    assert context.entry.matches_expected, \
        f"{context.entry.annihilator.to_text()} differs from {context.entry.expected}"


@then('it equals "{expected}"')
def step_impl(context, expected):
    found = context.entry.annihilator.to_sympy()
    assert sympy.expand(found - sympy.sympify(expected)) == 0, f"Found {context.entry.annihilator.to_text()}"


@when('I run the transform battery with {count:d} polynomials')
def step_impl(context, count):
    context.entries = transform_battery(context.run_config.seed, count=count)


@then('every battery entry is recorded as verified or not found')
def step_impl(context):
    for entry in context.entries:
        assert entry.to_dict()["status"] in ("verified", "not-found"), f"Unrecorded case {entry.series_id}"


@then('the anchor entry matches its recorded annihilator')
def step_impl(context):
    assert context.entries[0].matches_expected
