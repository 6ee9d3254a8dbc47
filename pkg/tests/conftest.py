from __future__ import annotations

import numpy as np
import pytest

from eflh.scenarios import ScenarioConfig, generate

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE_LINES.append(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def quad8():
    """8 equal segments, T = 512, d = 2."""
    return generate(ScenarioConfig(T=512, n_segments=8, seed=0))


@pytest.fixture(scope="session")
def linear4():
    return generate(ScenarioConfig(T=256, kind="piecewise-linear", n_segments=4, seed=1))


@pytest.fixture(scope="session")
def expc4():
    return generate(ScenarioConfig(T=256, kind="exp-concave", n_segments=4, seed=2))
