import numpy as np
import pytest

from relaybargain import NetworkInstance, PhysicalParams, ScenarioConfig, generate_scenario

# Filled by the acceptance tests: criterion number -> (passed, detail).
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def table1():
    """Seed-0 instance with every default parameter."""
    return generate_scenario(ScenarioConfig(), 0)


@pytest.fixture
def params():
    return PhysicalParams()


def make_instance(h, g, **changes):
    return NetworkInstance(np.atleast_1d(h), np.atleast_1d(g), PhysicalParams(**changes))
