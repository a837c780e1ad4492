import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


_criterion_lines = []


@pytest.fixture
def report_criterion():
    """Print one PASS/FAIL line for an acceptance criterion and keep it for the session summary."""

    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _criterion_lines.append(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criterion_lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
