import math

import numpy as np
import pytest

from wentzell.spectral import WentzellParams
from wentzell.state import Grid, State

# case id -> (params, alpha)
PRESETS = {
    "sub": (WentzellParams(1.0, 1.0, 3.0), 0.0),
    "crit": (WentzellParams(1.0, 1.0, 1.0), -1.0),
    "super": (WentzellParams(1.0, 3.0, 1.0), 0.0),
}


def sine_state(n_x: int) -> State:
    return State.from_function(Grid(n_x), lambda x: math.sqrt(2.0) * np.sin(math.pi * x),
                               boundary=0.0)


@pytest.fixture(params=list(PRESETS))
def preset(request):
    params, alpha = PRESETS[request.param]
    return request.param, params, alpha


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record ``(criterion, passed, detail)``; lines are echoed and summarised at the end."""

    def record(k: int, passed: bool, detail: str) -> None:
        line = f"ACCEPTANCE {k}: {'PASS' if passed else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
