import pytest

from mdiqd import make_rng

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return make_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
