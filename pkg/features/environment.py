import os
import sys
import logging
from behave import fixture, use_fixture

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from config import build_config, environment_overrides

# Configure logging for tests
logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("behave_test")

ACCEPTANCE_SEED = 42


@fixture
def deterministic_config(context):
    """Seeded run configuration shared by every scenario; NCID_SEED and NCID_PRIMES still apply."""
    context.run_config = build_config({"suppress_timestamp": True})
    if "seed" not in environment_overrides():
        context.run_config.seed = ACCEPTANCE_SEED
    logger.info(f"Acceptance run with seed {context.run_config.seed}, primes {context.run_config.primes[:2]}")
    yield context.run_config
    logger.info("Acceptance run finished")


def before_all(context):
    use_fixture(deterministic_config, context)


def before_scenario(context, scenario):
    context.results = {}


def after_scenario(context, scenario):
    if scenario.status == "failed":
        logger.error(f"Scenario failed: {scenario.name}")
