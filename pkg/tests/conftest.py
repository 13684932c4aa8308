import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from quenchlab import ArrayParams
from quenchlab.quench import STANDARD_TAUS, sweep_spectra

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def defaults():
    return ArrayParams()


@pytest.fixture(scope="session")
def standard_spectra(defaults):
    """Net-excitation spectra for the full quench-time list at 512 k points (about 40 s)."""
    return sweep_spectra(defaults, STANDARD_TAUS, 512)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
