import numpy as np
import pytest

from dskg.geometry import SpacetimeParams, find_horizons
from dskg.operators import ModeGrid, assemble_bundle

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def sdsk_params():
    return SpacetimeParams(0.03, 1.0, 0.0, 0.0)


@pytest.fixture(scope="session")
def kerr_params():
    return SpacetimeParams(0.03, 1.0, 0.1, 0.0)


@pytest.fixture(scope="session")
def small_bundle(kerr_params):
    return assemble_bundle(kerr_params, ModeGrid(1, 59, 20.0, 4), Q=4, asymptotics=True)


@pytest.fixture(scope="session")
def schwarzschild_bundle(sdsk_params):
    return assemble_bundle(sdsk_params, ModeGrid(1, 79, 25.0, 6), Q=6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def kerr_horizons(kerr_params):
    return find_horizons(kerr_params)
