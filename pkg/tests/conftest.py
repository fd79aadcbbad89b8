import numpy as np
import pytest

from slowbond.grid import Grid

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[16, 64])
def torus(request):
    return Grid(request.param, "torus")


def cos2pi(u):
    return np.cos(2 * np.pi * np.asarray(u, dtype=float))


def halfcos(u):
    return 0.5 * (1 + np.cos(np.pi * np.asarray(u, dtype=float)))
