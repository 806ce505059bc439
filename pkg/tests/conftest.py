from __future__ import annotations

import pytest

from fracbvp.problem import parse_problem

#: Filled by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_LINES: list[str] = []

FLAGSHIP = {
    "alpha": 1.5,
    "weight": {"kind": "power", "c": 1.0, "beta": 1.2},
    "nonlinearity": {"kind": "power", "theta": 0.3},
}


def constant_problem(alpha: float, value: float = 1.0):
    """h = 1 and f = value, so that S is a constant map."""
    return parse_problem({
        "alpha": alpha,
        "weight": {"kind": "power", "c": 1.0, "beta": 0.0},
        "nonlinearity": {"kind": "expression", "expr": f"{value!r} + 0*u"},
    })


@pytest.fixture(scope="session")
def flagship():
    return parse_problem(FLAGSHIP)


@pytest.fixture(scope="session")
def flagship_certificate(flagship):
    from fracbvp.certify import certify_case2

    return certify_case2(flagship)


@pytest.fixture(scope="session")
def flagship_solution(flagship, flagship_certificate):
    import time

    from fracbvp.solver import picard_solve

    start = time.perf_counter()
    report = picard_solve(flagship, certificate=flagship_certificate)
    return report, time.perf_counter() - start


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
