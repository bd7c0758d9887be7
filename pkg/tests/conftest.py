import pytest

from qfpdft.synth import PsoSettings, SearchSpace, pso_optimize


@pytest.fixture(scope="session")
def small_result():
    """A cheap d = 2 design; not a good gate, just a valid one."""
    settings = PsoSettings(swarm_size=12, iterations=30, restarts=1, polish=False, seed=5)
    return pso_optimize(SearchSpace(2, 4), settings)


ACCEPTANCE_LINES = []


def report(number, passed, detail):
    """Record one acceptance line; printed again in the terminal summary."""
    line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
