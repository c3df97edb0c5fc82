import math

import pytest

from nlcc.qstate import SeededRng


def within_sigmas(successes: int, trials: int, p: float, k: float = 4.0) -> bool:
    """Binomial frequency check: |rate - p| <= k sigma, with a floor for p near 0 or 1."""
    sigma = math.sqrt(max(p * (1 - p), 1e-12) / trials)
    return abs(successes / trials - p) <= k * sigma + 1.0 / trials


@pytest.fixture
def rng():
    return SeededRng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
