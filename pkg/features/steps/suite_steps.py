import sys
import os
import json
import tempfile
from behave import when, then

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from cli import main


@when('I run the paper suite with seed {seed:d} twice')
def step_impl(context, seed):
    context.reports = []
    context.exit_codes = []
    with tempfile.TemporaryDirectory() as workdir:
        path = os.path.join(workdir, "suite.json")
        for _ in range(2):
            context.exit_codes.append(main(["--paper-suite", "--seed", str(seed), "--output", path]))
            with open(path, "rb") as handle:
                context.reports.append(handle.read())


@then('both reports are byte-identical')
def step_impl(context):
    assert context.exit_codes[0] == context.exit_codes[1]
    assert context.reports[0] == context.reports[1], "Reports differ between runs"


@then('neither report has a timestamp')
def step_impl(context):
    for raw in context.reports:
        report = json.loads(raw)
        assert "timestamp" not in report
        assert report["seed"] == 42
