import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE = 10
_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records an acceptance verdict and fails the test when ``ok`` is false."""
    verdicts = request.config.stash.setdefault(_KEY, {})

    def record(n: int, ok: bool, detail: str) -> None:
        verdicts[n] = (bool(ok), detail)
        assert ok, f"criterion {n}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(_KEY, None)
    if verdicts is None:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE + 1):
        ok, detail = verdicts.get(n, (False, "not run to completion"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
