from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from resonance_lab.model import build_duffing, build_two_dof

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture(scope="session")
def duffing():
    return build_duffing()


@pytest.fixture(scope="session")
def two_dof():
    return build_two_dof()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Context manager recording the outcome of one acceptance criterion.

    The body receives a dict; whatever it stores under ``"detail"`` is shown
    next to the pass/fail line in the terminal summary.
    """
    results = request.config.stash.setdefault(CRITERIA, {})

    @contextmanager
    def record(number, title):
        info = {"detail": ""}
        try:
            yield info
        except BaseException as exc:
            first = str(exc).strip().splitlines()
            results[number] = (title, False, first[0] if first else type(exc).__name__)
            print(f"criterion {number}: FAIL {title}")
            raise
        results[number] = (title, True, info["detail"])
        print(f"criterion {number}: PASS {title} {info['detail']}")
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
