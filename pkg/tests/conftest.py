import pytest

CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[CRITERIA] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; all lines are printed in the summary."""

    def record(number: int, passed: bool, detail: str) -> str:
        line = f"CRITERION {number} {'PASS' if passed else 'FAIL'} {detail}"
        request.config.stash[CRITERIA].append((number, line))
        print(line)
        return line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
