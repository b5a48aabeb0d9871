from __future__ import annotations

import numpy as np
import pytest

from mccoffload.model import CallGraph, SystemParams, TaskSpec, build_scenario

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"{criterion}: {'PASS' if passed else 'FAIL'} - {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def single_task(**params):
    graph = CallGraph((TaskSpec(2e9, 1.4e5, 1.4e5),))
    return build_scenario(graph, [0.99], SystemParams(**params))


def two_task(**params):
    graph = CallGraph((TaskSpec(2e9, 1.4e5, 1.4e5), TaskSpec(1.6e9, 2.8e5, 2.8e5)))
    # r~_2 = 0.9 on top of r_1 = 0.99
    return build_scenario(graph, [0.99, 0.99 * 0.9], SystemParams(**params))


def grid(start: float, stop: float, step: float) -> list[float]:
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
