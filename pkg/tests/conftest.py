import pytest

from acceptance_log import RESULTS
from builders import figure_example


@pytest.fixture
def fig_spec():
    return figure_example()


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
