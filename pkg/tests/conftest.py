import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)



SUITE_BUDGET_S = 120.0


def pytest_sessionstart(session):
    session.config._hawp_t0 = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    t0 = getattr(config, "_hawp_t0", None)
    if t0 is None:
        return
    elapsed = time.perf_counter() - t0
    ok = elapsed < SUITE_BUDGET_S
    terminalreporter.write_line(
        f"[acceptance 10] {'PASS' if ok else 'FAIL'}  suite runtime: {elapsed:.1f} s (< {SUITE_BUDGET_S:.0f} s)"
    )
