import pytest

from helmcontrol.cli import solve_scenario
from helmcontrol.scenario import load_bundled

# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def scenario_run():
    """Solved bundled scenarios, computed once per session (ocean runs take minutes)."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = solve_scenario(load_bundled(name))
        return cache[name]

    return get


@pytest.fixture
def acceptance():
    def record(number: int, checks: list[tuple[str, bool]]) -> bool:
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{label} [{'ok' if passed else 'FAIL'}]" for label, passed in checks)
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
