import numpy as np
import pytest

from tabular_ope.mdp import random_mdp, random_policy

_CRITERIA: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; all lines are echoed in the terminal summary."""

    def _record(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'} {name}: {detail}"
        print(line)
        _CRITERIA.append(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_instance(seed, S=2, A=2, H=3, floor=0.2):
    g = np.random.default_rng(seed)
    return random_mdp(S, A, H, g), random_policy(S, A, H, g, floor=floor)
