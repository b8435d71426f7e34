import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=int(os.environ.get("HYPOTHESIS_EXAMPLES", "60")),
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

from chebkex.rng import HashDrbg  # noqa: E402
from chebkex.strategy import shipped_suites  # noqa: E402


@pytest.fixture(scope="session")
def suites():
    return shipped_suites()


@pytest.fixture
def drbg(request):
    return HashDrbg(request.node.name)


# acceptance results are collected here and echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
